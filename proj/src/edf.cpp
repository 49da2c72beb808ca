#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "eegemd/error.hpp"
#include "eegemd/signal.hpp"
#include "eegemd/text_io.hpp"

namespace eegemd {

namespace {

constexpr char kAnnotationLabel[] = "EDF Annotations";
constexpr int kDigMin = -32768;
constexpr int kDigMax = 32767;

std::string field(const std::vector<char>& buf, size_t offset, size_t width) {
  if (offset + width > buf.size()) throw format_error("EDF header truncated");
  return trim(std::string_view(buf.data() + offset, width));
}

double header_double(const std::vector<char>& buf, size_t offset, size_t width, const char* what) {
  try {
    return parse_double(field(buf, offset, width));
  } catch (const std::invalid_argument&) {
    throw format_error(std::string("EDF header: bad ") + what);
  }
}

long header_long(const std::vector<char>& buf, size_t offset, size_t width, const char* what) {
  try {
    return parse_long(field(buf, offset, width));
  } catch (const std::invalid_argument&) {
    throw format_error(std::string("EDF header: bad ") + what);
  }
}

struct SignalHeader {
  std::string label;
  double phys_min, phys_max;
  long dig_min, dig_max;
  long samples_per_record;
  bool annotation;
};

// Decodes the time-stamped annotation lists of one data record.
void parse_tals(std::string_view bytes, double sample_rate, std::vector<Annotation>& out) {
  size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes[pos] == '\0') {
      ++pos;
      continue;
    }
    const size_t end = bytes.find('\0', pos);
    if (end == std::string_view::npos) throw format_error("EDF+ annotation TAL not terminated");
    const std::string_view tal = bytes.substr(pos, end - pos);
    pos = end + 1;
    const auto parts = split(tal, '\x14');
    if (parts.size() < 2) throw format_error("unknown EDF+ annotation encoding");
    const auto timing = split(parts[0], '\x15');
    if (timing.empty() || timing[0].empty() || (timing[0][0] != '+' && timing[0][0] != '-')) {
      throw format_error("unknown EDF+ annotation encoding: bad onset");
    }
    double onset = 0.0;
    double duration = 0.0;
    try {
      onset = parse_double(timing[0]);
      if (timing.size() > 1 && !timing[1].empty()) duration = parse_double(timing[1]);
    } catch (const std::invalid_argument&) {
      throw format_error("unknown EDF+ annotation encoding: bad timing");
    }
    for (size_t k = 1; k < parts.size(); ++k) {
      const std::string text = trim(parts[k]);
      if (text.empty()) continue;  // time-keeping TAL
      out.push_back({std::lround(onset * sample_rate), std::lround(duration * sample_rate), text});
    }
  }
}

std::string pad(std::string_view s, size_t width) {
  std::string out(s.substr(0, width));
  out.resize(width, ' ');
  return out;
}

std::string fit_number(double v, size_t width) {
  for (int prec = 10; prec >= 1; --prec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strlen(buf) <= width) return buf;
  }
  throw invalid_input("number does not fit EDF header field");
}

}  // namespace

Recording read_edf(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 256) throw format_error("EDF header truncated: " + path.string());

  const long header_bytes = header_long(buf, 184, 8, "header size");
  long n_records = header_long(buf, 236, 8, "record count");
  const double record_duration = header_double(buf, 244, 8, "record duration");
  const long ns = header_long(buf, 252, 4, "signal count");
  if (ns <= 0) throw format_error("EDF header declares no signals");
  if (header_bytes != 256 + 256 * ns) throw format_error("EDF header size inconsistent with signal count");
  if (!(record_duration > 0.0)) throw format_error("EDF record duration must be positive");
  if (buf.size() < static_cast<size_t>(header_bytes)) throw format_error("EDF signal headers truncated");

  std::vector<SignalHeader> sig(ns);
  size_t off = 256;
  for (long s = 0; s < ns; ++s) sig[s].label = field(buf, off + 16 * s, 16);
  off += 16 * ns + 80 * ns + 8 * ns;  // label, transducer, physical dimension
  for (long s = 0; s < ns; ++s) sig[s].phys_min = header_double(buf, off + 8 * s, 8, "physical min");
  off += 8 * ns;
  for (long s = 0; s < ns; ++s) sig[s].phys_max = header_double(buf, off + 8 * s, 8, "physical max");
  off += 8 * ns;
  for (long s = 0; s < ns; ++s) sig[s].dig_min = header_long(buf, off + 8 * s, 8, "digital min");
  off += 8 * ns;
  for (long s = 0; s < ns; ++s) sig[s].dig_max = header_long(buf, off + 8 * s, 8, "digital max");
  off += 8 * ns + 80 * ns;  // prefiltering
  for (long s = 0; s < ns; ++s) {
    sig[s].samples_per_record = header_long(buf, off + 8 * s, 8, "samples per record");
    if (sig[s].samples_per_record <= 0) throw format_error("EDF signal with no samples per record");
  }
  for (auto& s : sig) {
    s.annotation = s.label == kAnnotationLabel;
    if (!s.annotation && s.dig_max <= s.dig_min) throw format_error("EDF digital range is empty");
  }

  long record_bytes = 0;
  for (const auto& s : sig) record_bytes += 2 * s.samples_per_record;
  const size_t data_bytes = buf.size() - static_cast<size_t>(header_bytes);
  if (n_records < 0) n_records = static_cast<long>(data_bytes / record_bytes);
  if (data_bytes < static_cast<size_t>(n_records) * record_bytes) {
    throw format_error("EDF data records truncated: " + path.string());
  }

  Recording rec;
  long per_record = -1;
  std::vector<long> data_signals;
  for (long s = 0; s < ns; ++s) {
    if (sig[s].annotation) continue;
    if (per_record < 0) per_record = sig[s].samples_per_record;
    if (sig[s].samples_per_record != per_record) {
      throw format_error("EDF signals with different sample rates are not supported");
    }
    data_signals.push_back(s);
    rec.channel_names.push_back(sig[s].label);
  }
  if (data_signals.empty()) throw format_error("EDF file has no data signals");
  rec.sample_rate = static_cast<double>(per_record) / record_duration;
  rec.data.resize(static_cast<Eigen::Index>(data_signals.size()), n_records * per_record);

  std::vector<double> gain(ns);
  std::vector<double> offset(ns);
  for (long s = 0; s < ns; ++s) {
    if (sig[s].annotation) continue;
    gain[s] = (sig[s].phys_max - sig[s].phys_min) / static_cast<double>(sig[s].dig_max - sig[s].dig_min);
    offset[s] = sig[s].phys_min - gain[s] * static_cast<double>(sig[s].dig_min);
  }

  const auto* bytes = reinterpret_cast<const unsigned char*>(buf.data() + header_bytes);
  size_t pos = 0;
  for (long r = 0; r < n_records; ++r) {
    Eigen::Index row = 0;
    for (long s = 0; s < ns; ++s) {
      const long count = sig[s].samples_per_record;
      if (sig[s].annotation) {
        parse_tals(std::string_view(reinterpret_cast<const char*>(bytes + pos), 2 * count),
                   rec.sample_rate, rec.annotations);
      } else {
        for (long k = 0; k < count; ++k) {
          const auto d = static_cast<int16_t>(bytes[pos + 2 * k] | (bytes[pos + 2 * k + 1] << 8));
          rec.data(row, r * per_record + k) = offset[s] + gain[s] * d;
        }
        ++row;
      }
      pos += 2 * count;
    }
  }
  std::stable_sort(rec.annotations.begin(), rec.annotations.end(),
                   [](const Annotation& a, const Annotation& b) { return a.onset < b.onset; });
  rec.validate();
  return rec;
}

void write_edf(const std::filesystem::path& path, const Recording& rec,
               std::pair<double, double> physical_range) {
  rec.validate();
  const double fs = rec.sample_rate;
  if (std::abs(fs - std::round(fs)) > 1e-9) throw invalid_input("EDF writer needs an integer sample rate");
  const long per_record = std::lround(fs);
  const long channels = static_cast<long>(rec.channel_names.size());
  const long total = rec.samples();
  const long n_records = std::max(1L, (total + per_record - 1) / per_record);

  double pmin = physical_range.first;
  double pmax = physical_range.second;
  if (!(pmax > pmin)) {
    pmin = rec.data.size() ? rec.data.minCoeff() : -1.0;
    pmax = rec.data.size() ? rec.data.maxCoeff() : 1.0;
    if (!(pmax > pmin)) {
      pmin -= 1.0;
      pmax += 1.0;
    }
  }
  const std::string pmin_s = fit_number(pmin, 8);
  const std::string pmax_s = fit_number(pmax, 8);
  pmin = parse_double(pmin_s);
  pmax = parse_double(pmax_s);
  const double gain = (pmax - pmin) / static_cast<double>(kDigMax - kDigMin);

  // TALs: record 0 carries its time-keeping TAL plus every annotation.
  auto timekeeping = [&](long r) {
    std::string t = "+" + std::to_string(r) + "\x14\x14";
    t.push_back('\0');
    return t;
  };
  std::string first = timekeeping(0);
  for (const Annotation& a : rec.annotations) {
    first += "+" + format_double(static_cast<double>(a.onset) / fs) + "\x15" +
             format_double(static_cast<double>(a.duration) / fs) + "\x14" + a.code + "\x14";
    first.push_back('\0');
  }
  const long ann_samples = static_cast<long>((first.size() + 1) / 2 + 4);

  const long ns = channels + 1;
  std::string h;
  h += pad("0", 8);
  h += pad("X X X X", 80);
  h += pad("Startdate X X X X", 80);
  h += pad("01.01.00", 8);
  h += pad("00.00.00", 8);
  h += pad(std::to_string(256 + 256 * ns), 8);
  h += pad("EDF+C", 44);
  h += pad(std::to_string(n_records), 8);
  h += pad("1", 8);
  h += pad(std::to_string(ns), 4);
  for (long s = 0; s < channels; ++s) h += pad(rec.channel_names[s], 16);
  h += pad(kAnnotationLabel, 16);
  for (long s = 0; s < ns; ++s) h += pad("", 80);
  for (long s = 0; s < channels; ++s) h += pad("uV", 8);
  h += pad("", 8);
  for (long s = 0; s < channels; ++s) h += pad(pmin_s, 8);
  h += pad("-1", 8);
  for (long s = 0; s < channels; ++s) h += pad(pmax_s, 8);
  h += pad("1", 8);
  for (long s = 0; s < ns; ++s) h += pad(std::to_string(kDigMin), 8);
  for (long s = 0; s < ns; ++s) h += pad(std::to_string(kDigMax), 8);
  for (long s = 0; s < ns; ++s) h += pad("", 80);
  for (long s = 0; s < channels; ++s) h += pad(std::to_string(per_record), 8);
  h += pad(std::to_string(ann_samples), 8);
  for (long s = 0; s < ns; ++s) h += pad("", 32);

  std::string body;
  body.reserve(static_cast<size_t>(n_records) * 2 * (channels * per_record + ann_samples));
  for (long r = 0; r < n_records; ++r) {
    for (long s = 0; s < channels; ++s) {
      for (long k = 0; k < per_record; ++k) {
        const long t = r * per_record + k;
        long d = 0;
        if (t < total) {
          const double v = (rec.data(s, t) - pmin) / gain + kDigMin;
          d = std::clamp(std::lround(v), static_cast<long>(kDigMin), static_cast<long>(kDigMax));
        }
        const auto u = static_cast<uint16_t>(static_cast<int16_t>(d));
        body.push_back(static_cast<char>(u & 0xff));
        body.push_back(static_cast<char>(u >> 8));
      }
    }
    std::string tal = r == 0 ? first : timekeeping(r);
    tal.resize(static_cast<size_t>(2 * ann_samples), '\0');
    body += tal;
  }

  write_text_file(path, h + body);
}

Recording read_csv_recording(const std::filesystem::path& data_csv,
                             const std::filesystem::path& annotations_csv) {
  std::string content;
  std::string ann_content;
  try {
    content = read_text_file(data_csv);
    ann_content = read_text_file(annotations_csv);
  } catch (const std::exception& e) {
    throw io_error(e.what());
  }
  Recording rec;
  std::vector<std::vector<double>> rows;
  bool have_header = false;
  for (const std::string& raw : split(content, '\n')) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(std::string_view(line).substr(1));
      if (body.rfind("sample_rate", 0) == 0) {
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw format_error("CSV recording: malformed sample_rate line");
        rec.sample_rate = parse_double(body.substr(eq + 1));
      }
      continue;
    }
    const auto fields = split(line, ',');
    if (!have_header) {
      for (const auto& name : fields) rec.channel_names.push_back(trim(name));
      have_header = true;
      continue;
    }
    if (fields.size() != rec.channel_names.size()) throw format_error("CSV recording: ragged row");
    std::vector<double> row;
    row.reserve(fields.size());
    try {
      for (const auto& v : fields) row.push_back(parse_double(v));
    } catch (const std::invalid_argument& e) {
      throw format_error(std::string("CSV recording: ") + e.what());
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw format_error("CSV recording has no header");
  if (!(rec.sample_rate > 0.0)) throw format_error("CSV recording needs '# sample_rate=<Hz>'");
  rec.data.resize(static_cast<Eigen::Index>(rec.channel_names.size()), static_cast<Eigen::Index>(rows.size()));
  for (size_t t = 0; t < rows.size(); ++t) {
    for (size_t c = 0; c < rows[t].size(); ++c) rec.data(c, t) = rows[t][c];
  }

  bool ann_header = false;
  for (const std::string& raw : split(ann_content, '\n')) {
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split(line, ',');
    if (!ann_header) {
      if (fields.size() != 3 || to_lower(trim(fields[0])) != "onset") {
        throw format_error("annotation CSV header must be onset,duration,code");
      }
      ann_header = true;
      continue;
    }
    if (fields.size() != 3) throw format_error("annotation CSV: expected onset,duration,code");
    try {
      rec.annotations.push_back({parse_long(fields[0]), parse_long(fields[1]), trim(fields[2])});
    } catch (const std::invalid_argument& e) {
      throw format_error(std::string("annotation CSV: ") + e.what());
    }
  }
  rec.validate();
  return rec;
}

}  // namespace eegemd
