#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace eegemd {

struct Annotation {
  long onset = 0;     // samples from recording start
  long duration = 0;  // samples
  std::string code;   // e.g. "T0", "T1", "T2"
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Recording {
  std::vector<std::string> channel_names;
  double sample_rate = 0.0;
  Eigen::MatrixXd data;  // channels x samples, physical units
  std::vector<Annotation> annotations;

  long samples() const { return static_cast<long>(data.cols()); }
  /// Throws invalid_input when the invariants do not hold.
  void validate() const;
};

enum class Hand { Left = 0, Right = 1 };
std::string_view to_string(Hand h);
Hand parse_hand(std::string_view s);

struct Epoch {
  Eigen::MatrixXd data;  // channels x samples
  Hand label = Hand::Left;
  int subject = 0;
  int run = 0;
  int trial = 0;  // index of the labelled trial within its recording
  int slice = 0;  // 0..3 within the trial
};

/// Reads an EDF or EDF+ file. Digital samples are scaled to physical units;
/// the "EDF Annotations" signal, when present, is decoded into annotations.
Recording read_edf(const std::filesystem::path& path);

/// Writes EDF+C with 16-bit samples. When `physical_range` is empty the
/// physical range is taken from the data; integer-valued data in
/// [-32768, 32767] with {-32768, 32767} round-trips exactly.
void write_edf(const std::filesystem::path& path, const Recording& rec,
               std::pair<double, double> physical_range = {0.0, 0.0});

/// CSV alternative: `# sample_rate=<Hz>` line, header of channel names, one
/// row per sample. Annotations come from a sidecar CSV with header
/// `onset,duration,code` (samples).
Recording read_csv_recording(const std::filesystem::path& data_csv,
                             const std::filesystem::path& annotations_csv);

/// Second-order section b0 b1 b2 / 1 a1 a2.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Digital Butterworth band-pass, `order` poles per band edge (the realised
/// filter has 2*order poles, as scipy.signal.butter(order, ..., 'bandpass')).
std::vector<Biquad> butterworth_bandpass(int order, double lo_hz, double hi_hz, double sample_rate);

/// Zero-phase forward-backward filtering with odd-extension padding and
/// steady-state initial conditions.
Eigen::VectorXd filtfilt(const std::vector<Biquad>& sos, const Eigen::VectorXd& x);

/// 4th-order Butterworth band-pass applied forward-backward to every channel.
Recording bandpass(const Recording& rec, double lo_hz = 8.0, double hi_hz = 30.0, int order = 4);

struct EpochingResult {
  std::vector<Epoch> epochs;
  int skipped_truncated = 0;
};

/// Cuts every T1 (left) / T2 (right) trial into `slices` consecutive windows
/// of `slice_seconds` starting at the trial onset. Other codes are ignored;
/// trials running past the end of the data are skipped and counted.
EpochingResult epoch_trials(const Recording& rec, double slice_seconds = 1.0, int slices = 4,
                            int subject = 0, int run = 0);

struct SplitSpec {
  std::uint64_t seed = 42;
  double test_fraction = 0.25;
};

struct SplitIndices {
  std::vector<size_t> train;
  std::vector<size_t> test;
};

/// Stratified, seeded shuffle split over epoch labels. Test size is
/// round(test_fraction * n); every class appears on both sides.
SplitIndices split(const std::vector<Hand>& labels, const SplitSpec& spec);
SplitIndices split(const std::vector<Epoch>& epochs, const SplitSpec& spec);

}  // namespace eegemd
