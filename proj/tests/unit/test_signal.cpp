#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "../support/synthetic.hpp"
#include "eegemd/error.hpp"
#include "eegemd/signal.hpp"
#include "eegemd/text_io.hpp"

using namespace eegemd;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eegemd_signal_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Eigen::VectorXd tone(double hz, double fs, int n, double amp = 1.0) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = amp * std::sin(2.0 * std::numbers::pi * hz * i / fs);
  return x;
}

// Peak amplitude over the central half, away from edge transients.
double central_peak(const Eigen::VectorXd& y) {
  const Eigen::Index q = y.size() / 4;
  return y.segment(q, 2 * q).cwiseAbs().maxCoeff();
}

Recording two_channel_recording() {
  Recording rec;
  rec.channel_names = {"C3", "C4"};
  rec.sample_rate = 160.0;
  rec.data.resize(2, 480);
  for (int t = 0; t < 480; ++t) {
    rec.data(0, t) = (t * 37) % 2001 - 1000;
    rec.data(1, t) = -((t * 53) % 4001 - 2000);
  }
  rec.annotations = {{0, 160, "T0"}, {160, 320, "T1"}};
  return rec;
}

}  // namespace

TEST(Edf, RoundTripsIntegerSamplesAndAnnotations) {
  const fs::path dir = temp_dir("roundtrip");
  const Recording rec = two_channel_recording();
  write_edf(dir / "a.edf", rec, {-32768.0, 32767.0});
  const Recording back = read_edf(dir / "a.edf");
  EXPECT_EQ(back.channel_names, rec.channel_names);
  EXPECT_EQ(back.sample_rate, 160.0);
  ASSERT_EQ(back.data.rows(), 2);
  ASSERT_EQ(back.data.cols(), 480);
  EXPECT_EQ(back.data, rec.data);
  EXPECT_EQ(back.annotations, rec.annotations);
}

TEST(Edf, RealValuedDataWithinQuantisationStep) {
  const fs::path dir = temp_dir("real");
  Recording rec = two_channel_recording();
  rec.data *= 0.0123;
  write_edf(dir / "b.edf", rec);
  const Recording back = read_edf(dir / "b.edf");
  const double range = rec.data.maxCoeff() - rec.data.minCoeff();
  EXPECT_LE((back.data - rec.data).cwiseAbs().maxCoeff(), range / 65535.0);
}

TEST(Edf, ZeroSignalHeaderIsError) {
  const fs::path dir = temp_dir("zero");
  write_edf(dir / "c.edf", two_channel_recording(), {-32768.0, 32767.0});
  std::string bytes = read_text_file(dir / "c.edf");
  bytes.replace(252, 4, "0   ");
  write_text_file(dir / "zero.edf", bytes);
  EXPECT_THROW(read_edf(dir / "zero.edf"), Error);
}

TEST(Edf, TruncatedFileIsError) {
  const fs::path dir = temp_dir("trunc");
  write_edf(dir / "d.edf", two_channel_recording(), {-32768.0, 32767.0});
  std::string bytes = read_text_file(dir / "d.edf");
  bytes.resize(bytes.size() - 100);
  write_text_file(dir / "t.edf", bytes);
  EXPECT_THROW(read_edf(dir / "t.edf"), Error);
  EXPECT_THROW(read_edf(dir / "missing.edf"), Error);
}

TEST(CsvRecording, ReadsDataAndSidecar) {
  const fs::path dir = temp_dir("csv");
  write_text_file(dir / "r.csv", "# sample_rate=160\nC3,C4\n1,2\n3,4\n5,6\n");
  write_text_file(dir / "r.ann.csv", "onset,duration,code\n0,3,T1\n");
  const Recording rec = read_csv_recording(dir / "r.csv", dir / "r.ann.csv");
  EXPECT_EQ(rec.channel_names, (std::vector<std::string>{"C3", "C4"}));
  EXPECT_EQ(rec.data(1, 2), 6.0);
  ASSERT_EQ(rec.annotations.size(), 1u);
  EXPECT_EQ(rec.annotations[0].code, "T1");
}

TEST(Bandpass, InBandToneKeepsAmplitude) {
  const auto sos = butterworth_bandpass(4, 8.0, 30.0, 160.0);
  const Eigen::VectorXd y = filtfilt(sos, tone(20.0, 160.0, 1600));
  EXPECT_NEAR(central_peak(y), 1.0, 0.05);
}

TEST(Bandpass, LowToneAttenuatedTwentyDb) {
  const auto sos = butterworth_bandpass(4, 8.0, 30.0, 160.0);
  const Eigen::VectorXd y = filtfilt(sos, tone(2.0, 160.0, 1600));
  EXPECT_LE(20.0 * std::log10(central_peak(y)), -20.0);
}

TEST(Bandpass, DcRemoved) {
  const auto sos = butterworth_bandpass(4, 8.0, 30.0, 160.0);
  const Eigen::VectorXd y = filtfilt(sos, Eigen::VectorXd::Constant(800, 5.0));
  EXPECT_NEAR(y.mean(), 0.0, 1e-3);
}

TEST(Bandpass, SinglePassMagnitudeMatchesButterworthShape) {
  // |H|^2 of an order-4 band-pass Butterworth: 1 / (1 + ((w^2 - w0^2)/(w*B))^8)
  // with prewarped analog frequencies.
  const double fs = 160.0;
  const auto sos = butterworth_bandpass(4, 8.0, 30.0, fs);
  auto warp = [&](double f) { return 2.0 * fs * std::tan(std::numbers::pi * f / fs); };
  const double w1 = warp(8.0), w2 = warp(30.0), w0sq = w1 * w2, bw = w2 - w1;
  for (double f : {3.0, 8.0, 12.0, 20.0, 30.0, 45.0, 70.0}) {
    std::complex<double> h(1.0, 0.0);
    const std::complex<double> z = std::polar(1.0, 2.0 * std::numbers::pi * f / fs);
    for (const Biquad& b : sos) {
      h *= (b.b0 + b.b1 / z + b.b2 / (z * z)) / (1.0 + b.a1 / z + b.a2 / (z * z));
    }
    const double w = warp(f);
    const double want = 1.0 / std::sqrt(1.0 + std::pow((w * w - w0sq) / (w * bw), 8));
    EXPECT_NEAR(std::abs(h), want, 1e-9) << f << " Hz";
  }
}

TEST(Bandpass, Linear) {
  std::mt19937_64 rng(9);
  const auto sos = butterworth_bandpass(4, 8.0, 30.0, 160.0);
  const Eigen::VectorXd x = testkit::gaussian(700, 1, rng);
  const Eigen::VectorXd y = testkit::gaussian(700, 1, rng);
  const Eigen::VectorXd lhs = filtfilt(sos, 2.5 * x - 0.75 * y);
  const Eigen::VectorXd rhs = 2.5 * filtfilt(sos, x) - 0.75 * filtfilt(sos, y);
  EXPECT_LE((lhs - rhs).norm(), 1e-9 * rhs.norm());
}

TEST(Bandpass, InvalidEdges) {
  EXPECT_THROW(butterworth_bandpass(4, 30.0, 8.0, 160.0), Error);
  EXPECT_THROW(butterworth_bandpass(4, 8.0, 80.0, 160.0), Error);
  EXPECT_THROW(butterworth_bandpass(4, 0.0, 30.0, 160.0), Error);
}

TEST(Epoching, FourSecondTrialGivesFourEpochs) {
  Recording rec;
  rec.channel_names = {"C3", "C4"};
  rec.sample_rate = 160.0;
  rec.data = Eigen::MatrixXd::Zero(2, 800);
  for (int t = 0; t < 800; ++t) rec.data(0, t) = t;
  rec.annotations = {{0, 80, "T0"}, {80, 640, "T1"}};
  const EpochingResult r = epoch_trials(rec);
  ASSERT_EQ(r.epochs.size(), 4u);
  for (int s = 0; s < 4; ++s) {
    const Epoch& e = r.epochs[s];
    EXPECT_EQ(e.data.cols(), 160);
    EXPECT_EQ(e.label, Hand::Left);
    EXPECT_EQ(e.slice, s);
    EXPECT_EQ(e.data(0, 0), 80 + 160 * s);  // consecutive, no gaps or overlap
    EXPECT_EQ(e.data(0, 159), 80 + 160 * s + 159);
  }
}

TEST(Epoching, RestOnlyAndTruncated) {
  Recording rec;
  rec.channel_names = {"C3"};
  rec.sample_rate = 160.0;
  rec.data = Eigen::MatrixXd::Zero(1, 700);
  rec.annotations = {{0, 600, "T0"}};
  EXPECT_TRUE(epoch_trials(rec).epochs.empty());
  rec.annotations = {{0, 600, "T2"}, {200, 500, "T1"}};
  const EpochingResult r = epoch_trials(rec);
  EXPECT_EQ(r.epochs.size(), 4u);
  EXPECT_EQ(r.epochs[0].label, Hand::Right);
  EXPECT_EQ(r.skipped_truncated, 1);
}

TEST(Epoching, SyntheticSubjectNear372Epochs) {
  // 6 runs of 15-16 trials: 93 trials, 372 epochs.
  const int trials[] = {15, 16, 15, 16, 15, 16};
  size_t total = 0;
  for (int run = 0; run < 6; ++run) {
    testkit::SyntheticRunSpec spec;
    spec.channels = {"C3", "C4"};
    spec.trials = trials[run];
    spec.seed = run;
    total += epoch_trials(testkit::synthetic_run(spec)).epochs.size();
  }
  EXPECT_EQ(total, 372u);
  EXPECT_NEAR(static_cast<double>(total), 370.0, 0.05 * 370.0);
}

TEST(Split, SizesDeterminismAndPartition) {
  std::vector<Hand> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i % 3 == 0 ? Hand::Right : Hand::Left);
  const SplitSpec spec{7, 0.2};
  const SplitIndices a = split(labels, spec);
  const SplitIndices b = split(labels, spec);
  EXPECT_EQ(a.train.size(), 80u);
  EXPECT_EQ(a.test.size(), 20u);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  std::set<size_t> all(a.train.begin(), a.train.end());
  for (size_t i : a.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 100u);
  const SplitIndices c = split(labels, SplitSpec{8, 0.2});
  EXPECT_NE(a.test, c.test);
}

TEST(Split, StratifiedBothClassesOnBothSides) {
  std::vector<Hand> labels(372, Hand::Left);
  for (size_t i = 0; i < 148; ++i) labels[i * 2] = Hand::Right;
  const SplitIndices s = split(labels, SplitSpec{42, 0.25});
  EXPECT_EQ(s.test.size(), 93u);
  int right_test = 0;
  for (size_t i : s.test) right_test += labels[i] == Hand::Right;
  EXPECT_GT(right_test, 0);
  EXPECT_LT(right_test, 93);
  EXPECT_NEAR(right_test, 93.0 * 148 / 372, 1.0);
}

TEST(Split, TooFewEpochs) {
  EXPECT_THROW(split(std::vector<Hand>{Hand::Left, Hand::Right, Hand::Right}, SplitSpec{}), Error);
  EXPECT_THROW(split(std::vector<Hand>(10, Hand::Left), SplitSpec{}), Error);
  EXPECT_THROW(split(std::vector<Hand>(10, Hand::Left), SplitSpec{1, 1.5}), Error);
}
