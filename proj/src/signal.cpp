#include "eegemd/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "eegemd/error.hpp"

namespace eegemd {

void Recording::validate() const {
  if (channel_names.empty()) throw invalid_input("recording has no channels");
  if (static_cast<size_t>(data.rows()) != channel_names.size()) {
    throw invalid_input("recording data rows do not match channel count");
  }
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw invalid_input("sample rate must be positive");
  for (const Annotation& a : annotations) {
    if (a.onset < 0 || a.onset > samples() || a.duration < 0) {
      throw invalid_input("annotation '" + a.code + "' outside data bounds");
    }
  }
}

std::string_view to_string(Hand h) { return h == Hand::Left ? "left" : "right"; }

Hand parse_hand(std::string_view s) {
  if (s == "left" || s == "Left" || s == "0") return Hand::Left;
  if (s == "right" || s == "Right" || s == "1") return Hand::Right;
  throw invalid_input("unknown class label '" + std::string(s) + "'");
}

std::vector<Biquad> butterworth_bandpass(int order, double lo_hz, double hi_hz, double sample_rate) {
  if (order < 1) throw invalid_input("filter order must be >= 1");
  if (!(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < sample_rate / 2.0)) {
    throw invalid_input("band edges must satisfy 0 < lo < hi < sample_rate/2");
  }
  using cd = std::complex<double>;
  const double pi = std::numbers::pi;
  const double fs2 = 2.0 * sample_rate;
  // Pre-warped analog band edges.
  const double w1 = fs2 * std::tan(pi * lo_hz / sample_rate);
  const double w2 = fs2 * std::tan(pi * hi_hz / sample_rate);
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);

  std::vector<cd> zpoles;
  for (int k = 0; k < order; ++k) {
    // Left-half-plane poles of the normalised low-pass prototype.
    const cd p = -std::exp(cd(0.0, pi * (2 * k - order + 1) / (2.0 * order)));
    const cd half = p * (bw / 2.0);
    const cd root = std::sqrt(half * half - w0 * w0);
    for (const cd s : {half + root, half - root}) {
      const cd z = (fs2 + s) / (fs2 - s);
      if (z.imag() > 0.0) zpoles.push_back(z);
    }
  }
  if (static_cast<int>(zpoles.size()) != order) throw Error("numeric", "unexpected band-pass pole layout");
  std::sort(zpoles.begin(), zpoles.end(), [](cd a, cd b) { return std::arg(a) < std::arg(b); });

  // Each section: zeros at z = 1 and z = -1, one conjugate pole pair.
  std::vector<Biquad> sos;
  const double wc = 2.0 * std::atan(w0 / fs2);
  const cd zc = std::exp(cd(0.0, wc));
  for (const cd& p : zpoles) {
    Biquad q{1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)};
    const cd zi = 1.0 / zc;
    const cd h = (q.b0 + q.b1 * zi + q.b2 * zi * zi) / (1.0 + q.a1 * zi + q.a2 * zi * zi);
    const double g = 1.0 / std::abs(h);  // unit gain at the band centre, per section
    q.b0 *= g;
    q.b1 *= g;
    q.b2 *= g;
    sos.push_back(q);
  }
  return sos;
}

namespace {

struct SectionState {
  double z0 = 0.0;
  double z1 = 0.0;
};

// Transposed direct form II, in place.
void run_sos(const std::vector<Biquad>& sos, std::vector<double>& x, std::vector<SectionState> state) {
  for (double& v : x) {
    double in = v;
    for (size_t k = 0; k < sos.size(); ++k) {
      const Biquad& q = sos[k];
      SectionState& s = state[k];
      const double y = q.b0 * in + s.z0;
      s.z0 = q.b1 * in - q.a1 * y + s.z1;
      s.z1 = q.b2 * in - q.a2 * y;
      in = y;
    }
    v = in;
  }
}

// Steady-state response to a unit step, section by section.
std::vector<SectionState> step_initial_state(const std::vector<Biquad>& sos, double level) {
  std::vector<SectionState> out;
  double scale = level;
  for (const Biquad& q : sos) {
    const double g = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    const double z1 = q.b2 - q.a2 * g;
    const double z0 = q.b1 - q.a1 * g + z1;
    out.push_back({scale * z0, scale * z1});
    scale *= g;
  }
  return out;
}

}  // namespace

Eigen::VectorXd filtfilt(const std::vector<Biquad>& sos, const Eigen::VectorXd& x) {
  const long n = static_cast<long>(x.size());
  const long padlen = 3 * (2 * static_cast<long>(sos.size()) + 1);
  if (n <= padlen) throw invalid_input("signal too short for zero-phase filtering");

  std::vector<double> ext(static_cast<size_t>(n + 2 * padlen));
  for (long i = 0; i < padlen; ++i) ext[i] = 2.0 * x(0) - x(padlen - i);
  for (long i = 0; i < n; ++i) ext[padlen + i] = x(i);
  for (long i = 0; i < padlen; ++i) ext[padlen + n + i] = 2.0 * x(n - 1) - x(n - 2 - i);

  run_sos(sos, ext, step_initial_state(sos, ext.front()));
  std::reverse(ext.begin(), ext.end());
  run_sos(sos, ext, step_initial_state(sos, ext.front()));
  std::reverse(ext.begin(), ext.end());

  Eigen::VectorXd y(n);
  for (long i = 0; i < n; ++i) y(i) = ext[padlen + i];
  return y;
}

Recording bandpass(const Recording& rec, double lo_hz, double hi_hz, int order) {
  rec.validate();
  const auto sos = butterworth_bandpass(order, lo_hz, hi_hz, rec.sample_rate);
  Recording out = rec;
  for (Eigen::Index c = 0; c < rec.data.rows(); ++c) {
    out.data.row(c) = filtfilt(sos, rec.data.row(c).transpose()).transpose();
  }
  return out;
}

EpochingResult epoch_trials(const Recording& rec, double slice_seconds, int slices, int subject, int run) {
  rec.validate();
  if (!(slice_seconds > 0.0) || slices < 1) throw invalid_input("invalid epoch geometry");
  const long len = std::lround(slice_seconds * rec.sample_rate);
  if (len < 2) throw invalid_input("epoch shorter than 2 samples");

  EpochingResult out;
  int trial = 0;
  for (const Annotation& a : rec.annotations) {
    Hand label;
    if (a.code == "T1") {
      label = Hand::Left;
    } else if (a.code == "T2") {
      label = Hand::Right;
    } else {
      continue;
    }
    const int this_trial = trial++;
    if (a.onset + slices * len > rec.samples()) {
      ++out.skipped_truncated;
      continue;
    }
    for (int s = 0; s < slices; ++s) {
      Epoch e;
      e.data = rec.data.middleCols(a.onset + s * len, len);
      e.label = label;
      e.subject = subject;
      e.run = run;
      e.trial = this_trial;
      e.slice = s;
      out.epochs.push_back(std::move(e));
    }
  }
  return out;
}

namespace {

// Fisher-Yates with an explicit bounded draw so the permutation does not
// depend on the standard library's distribution implementation.
void seeded_shuffle(std::vector<size_t>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const auto r = static_cast<unsigned __int128>(rng()) * i;
    const auto j = static_cast<size_t>(r >> 64);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

SplitIndices split(const std::vector<Hand>& labels, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw invalid_input("test_fraction must lie in (0, 1)");
  }
  std::vector<std::vector<size_t>> by_class(2);
  for (size_t i = 0; i < labels.size(); ++i) by_class[static_cast<int>(labels[i])].push_back(i);
  for (const auto& members : by_class) {
    if (members.size() < 2) throw invalid_input("split needs at least 2 epochs per class");
  }

  const size_t n = labels.size();
  const auto total_test = static_cast<size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
  // Largest-remainder allocation of the test quota across classes.
  std::vector<size_t> quota(by_class.size());
  std::vector<std::pair<double, size_t>> remainders;
  size_t assigned = 0;
  for (size_t c = 0; c < by_class.size(); ++c) {
    const double exact = spec.test_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t k = 0; assigned < total_test && k < remainders.size(); ++k, ++assigned) {
    ++quota[remainders[k].second];
  }
  // Both sides must see both classes.
  for (size_t c = 0; c < by_class.size(); ++c) {
    const size_t other = 1 - c;
    if (quota[c] == 0) {
      quota[c] = 1;
      if (quota[other] > 1) --quota[other];
    }
    if (quota[c] >= by_class[c].size()) {
      quota[c] = by_class[c].size() - 1;
      if (quota[other] + 1 < by_class[other].size()) ++quota[other];
    }
  }

  std::mt19937_64 rng(spec.seed);
  SplitIndices out;
  for (size_t c = 0; c < by_class.size(); ++c) {
    std::vector<size_t> members = by_class[c];
    seeded_shuffle(members, rng);
    out.test.insert(out.test.end(), members.begin(), members.begin() + static_cast<long>(quota[c]));
    out.train.insert(out.train.end(), members.begin() + static_cast<long>(quota[c]), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitIndices split(const std::vector<Epoch>& epochs, const SplitSpec& spec) {
  std::vector<Hand> labels;
  labels.reserve(epochs.size());
  for (const Epoch& e : epochs) labels.push_back(e.label);
  return split(labels, spec);
}

}  // namespace eegemd
