#include <algorithm>
#include <string>

#include "eegemd/cli.hpp"
#include "eegemd/error.hpp"
#include "eegemd/text_io.hpp"

namespace eegemd::cli {

namespace {

constexpr double kCell = 40.0;
constexpr double kMargin = 30.0;
constexpr double kBaseRadius = 5.0;
constexpr double kMaxExtra = 10.0;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return format_fixed(v, 2); }

}  // namespace

std::string render_svg(const SpatialMap& map, const GridLayout& layout, const PlotOptions& opts) {
  if (map.n() != layout.n()) throw invalid_input("map and layout grid orders differ");
  const double side = layout.n() * kCell + 2 * kMargin;
  const double top = opts.title.empty() ? 0.0 : 24.0;
  const double cx = side / 2.0;
  const double cy = top + side / 2.0;
  const double head_r = layout.n() * kCell / 2.0 + 4.0;

  double max_mass = 0.0;
  for (double m : map.mass()) max_mass = std::max(max_mass, m);

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(side) + "\" height=\"" + num(side + top) +
       "\" viewBox=\"0 0 " + num(side) + " " + num(side + top) + "\">\n";
  s += "<style>.electrode{fill:#ffffff;stroke:#555555;stroke-width:1}"
       ".highlighted{fill:#d62728;fill-opacity:0.85}"
       ".label{font-family:sans-serif;font-size:8px;text-anchor:middle;fill:#222222}"
       ".head{fill:none;stroke:#333333;stroke-width:2}</style>\n";
  if (!opts.title.empty()) {
    s += "<text x=\"" + num(cx) + "\" y=\"18.00\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14px\">" + escape(opts.title) + "</text>\n";
  }
  s += "<circle class=\"head\" cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(head_r) + "\"/>\n";
  s += "<polygon class=\"head\" points=\"" + num(cx - 10) + "," + num(cy - head_r + 1) + " " + num(cx) + "," +
       num(cy - head_r - 12) + " " + num(cx + 10) + "," + num(cy - head_r + 1) + "\"/>\n";

  for (const Electrode& e : layout.electrodes()) {
    const double mass = map.at(e.cell);
    const double x = kMargin + (e.cell.col + 0.5) * kCell;
    const double y = top + kMargin + (e.cell.row + 0.5) * kCell;
    const bool hot = mass > 0.0;
    const double r = hot ? kBaseRadius + kMaxExtra * mass / max_mass : kBaseRadius;
    s += "<circle class=\"electrode" + std::string(hot ? " highlighted" : "") + "\" data-name=\"" +
         escape(e.name) + "\" data-mass=\"" + format_double(mass) + "\" cx=\"" + num(x) + "\" cy=\"" + num(y) +
         "\" r=\"" + num(r) + "\"/>\n";
    s += "<text class=\"label\" x=\"" + num(x) + "\" y=\"" + num(y + r + 9.0) + "\">" + escape(e.name) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void cmd_plot(const SpatialMap& map, const GridLayout& layout, const std::filesystem::path& out,
              const PlotOptions& opts) {
  write_text_file(out, render_svg(map, layout, opts));
}

}  // namespace eegemd::cli
