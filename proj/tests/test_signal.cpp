#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "dirfocus/error.hpp"
#include "dirfocus/rng.hpp"
#include "dirfocus/signal/audio_io.hpp"
#include "dirfocus/signal/filter.hpp"
#include "dirfocus/signal/resample.hpp"
#include "dirfocus/signal/stft.hpp"

using namespace dirfocus;
using namespace dirfocus::signal;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXd sine_row(double freq, double fs, Index n, double amp = 1.0) {
  Eigen::MatrixXd x(1, n);
  for (Index i = 0; i < n; ++i) x(0, i) = amp * std::sin(2 * kPi * freq * static_cast<double>(i) / fs);
  return x;
}

double rms(const Eigen::Ref<const Eigen::RowVectorXd>& x) { return std::sqrt(x.squaredNorm() / static_cast<double>(x.size())); }

// Plain O(N^2) DFT of one frame.
std::complex<double> dft_bin(const Eigen::VectorXd& frame, Index k) {
  std::complex<double> acc = 0;
  const auto n = static_cast<double>(frame.size());
  for (Index i = 0; i < frame.size(); ++i) acc += frame[i] * std::polar(1.0, -2 * kPi * k * static_cast<double>(i) / n);
  return acc;
}

}  // namespace

TEST_CASE("butterworth sections hit -3 dB at the cutoff", "[filter]") {
  for (int order : {2, 4, 6}) {
    const auto lp = butterworth<double>(FilterType::Lowpass, order, 20.0, 128.0);
    const auto hp = butterworth<double>(FilterType::Highpass, order, 20.0, 128.0);
    CHECK_THAT(sos_magnitude(lp, 20.0, 128.0), WithinAbs(1 / std::sqrt(2.0), 1e-12));
    CHECK_THAT(sos_magnitude(hp, 20.0, 128.0), WithinAbs(1 / std::sqrt(2.0), 1e-12));
    CHECK_THAT(sos_magnitude(lp, 0.0, 128.0), WithinAbs(1.0, 1e-12));
    CHECK_THAT(sos_magnitude(hp, 64.0, 128.0), WithinAbs(1.0, 1e-12));
  }
  CHECK_THROWS_AS(butterworth<double>(FilterType::Lowpass, 3, 20.0, 128.0), ParameterError);
  CHECK_THROWS_AS(butterworth<double>(FilterType::Lowpass, 4, 64.0, 128.0), ParameterError);
}

TEST_CASE("sosfilt matches the direct difference equation", "[filter]") {
  const auto sos = butterworth<double>(FilterType::Lowpass, 2, 10.0, 100.0);
  Rng rng(3);
  std::normal_distribution<double> g;
  Eigen::VectorXd x(200);
  for (auto& v : x) v = g(rng);
  const auto& s = sos[0];
  Eigen::VectorXd ref(200);
  for (Index n = 0; n < 200; ++n) {
    double y = s.b0 * x[n];
    if (n >= 1) y += s.b1 * x[n - 1] - s.a1 * ref[n - 1];
    if (n >= 2) y += s.b2 * x[n - 2] - s.a2 * ref[n - 2];
    ref[n] = y;
  }
  const Eigen::VectorXd y = sosfilt<double>(sos, x, false);
  CHECK((y - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sosfilt steady-state start has no transient on a constant", "[filter]") {
  const auto sos = butterworth<double>(FilterType::Lowpass, 4, 10.0, 100.0);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(50, 2.5);
  const Eigen::VectorXd y = sosfilt<double>(sos, x);
  CHECK((y.array() - 2.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("bandpass keeps an in-band tone and rejects an out-of-band one", "[filter]") {
  const Index n = 128 * 20;
  const auto x = sine_row(10.0, 128.0, n);
  const auto y = bandpass_filter(x, 128.0, 1.0, 32.0);
  const Index skip = 128 * 2;
  const double gain_db = 20 * std::log10(rms(y.row(0).segment(skip, n - 2 * skip)) / rms(x.row(0).segment(skip, n - 2 * skip)));
  CHECK(std::abs(gain_db) < 1.0);

  const auto x60 = sine_row(60.0, 256.0, 256 * 20);
  const auto y60 = bandpass_filter(x60, 256.0, 1.0, 32.0);
  const Index skip2 = 256 * 2;
  const Index len2 = 256 * 16;
  CHECK(rms(y60.row(0).segment(skip2, len2)) < 0.01 * rms(x60.row(0).segment(skip2, len2)));

  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 500);
  CHECK(bandpass_filter(zero, 128.0, 1.0, 32.0).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(bandpass_filter(zero, 128.0, 32.0, 1.0), ParameterError);
  CHECK_THROWS_AS(bandpass_filter(zero, 128.0, 1.0, 64.0), ParameterError);
}

TEST_CASE("zero-phase filtering does not shift a tone", "[filter]") {
  const Index n = 4096;
  const auto x = sine_row(8.0, 128.0, n);
  const auto y = bandpass_filter(x, 128.0, 2.0, 20.0);
  // Cross-correlation at lags -2..2 peaks at lag 0.
  double best = -1e300;
  int best_lag = 99;
  for (int lag = -2; lag <= 2; ++lag) {
    double c = 0;
    for (Index i = 500; i < n - 500; ++i) c += x(0, i) * y(0, i + lag);
    if (c > best) best = c, best_lag = lag;
  }
  CHECK(best_lag == 0);
}

TEST_CASE("rational ratios reduce exactly", "[resample]") {
  CHECK(rational_ratio(1024, 128) == std::pair<std::int64_t, std::int64_t>{1, 8});
  CHECK(rational_ratio(44100, 8000) == std::pair<std::int64_t, std::int64_t>{80, 441});
  CHECK(rational_ratio(8000, 8000) == std::pair<std::int64_t, std::int64_t>{1, 1});
}

TEST_CASE("resample lengths and identity", "[resample]") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 1024);
  CHECK(resample(x, 1024, 128).cols() == 128);
  CHECK(resample(x, 1024, 128).rows() == 2);
  const Eigen::MatrixXd same = resample(x, 8000, 8000);
  CHECK(same == x);
  CHECK_THROWS_AS(resample(x, 0, 100), ParameterError);
}

TEST_CASE("resampled 5 Hz sine matches the analytic sine at the new rate", "[resample]") {
  const double from = 44100, to = 8000;
  const auto x = sine_row(5.0, from, 44100);
  const Eigen::MatrixXd y = resample(x, from, to);
  REQUIRE(y.cols() == 8000);
  const auto ref = sine_row(5.0, to, 8000);
  const Index a = 200, len = 7600;
  const Eigen::RowVectorXd ys = y.row(0).segment(a, len), rs = ref.row(0).segment(a, len);
  const double corr = ys.dot(rs) / (ys.norm() * rs.norm());
  CHECK(corr > 0.999);
  CHECK(std::abs(rms(ys) / rms(rs) - 1) < 0.01);
}

TEST_CASE("downsampling 1024 Hz to 128 Hz keeps an in-band tone", "[resample]") {
  const auto x = sine_row(10.0, 1024.0, 1024 * 4);
  const Eigen::MatrixXd y = resample(x, 1024, 128);
  const auto ref = sine_row(10.0, 128.0, 128 * 4);
  CHECK((y.row(0).segment(32, 448) - ref.row(0).segment(32, 448)).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("periodic hann window", "[stft]") {
  const auto w = hann_window<double>(8);
  CHECK(w[0] == 0.0);
  CHECK_THAT(w[4], WithinAbs(1.0, 1e-15));
  CHECK_THAT(w[2], WithinAbs(0.5, 1e-15));
  CHECK_THAT(w[6], WithinAbs(w[2], 1e-15));
}

TEST_CASE("stft shapes and frame count", "[stft]") {
  MultiChannelAudio a;
  a.sample_rate = 8000;
  a.samples = Eigen::MatrixXd::Zero(2, 8000);
  const auto s = stft(a);
  CHECK(s.channels() == 2);
  CHECK(s.num_bins() == 257);
  CHECK(s.num_frames() == 1 + (8000 - 512) / 256);
  CHECK(s.bins[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK_THAT(s.freq_resolution(), WithinRel(15.625, 1e-12));

  a.samples = Eigen::MatrixXd::Zero(1, 511);
  CHECK_THROWS_AS(stft(a), ParameterError);
}

TEST_CASE("stft bins agree with a direct DFT", "[stft]") {
  MultiChannelAudio a;
  a.sample_rate = 8000;
  a.samples = Eigen::MatrixXd::Random(1, 64 * 3);
  const auto s = stft(a, 64, 32);
  const auto w = hann_window<double>(64);
  for (Index n : {0, 2, 4}) {
    const Eigen::VectorXd frame = a.samples.row(0).segment(n * 32, 64).transpose().cwiseProduct(w);
    for (Index k = 0; k < 33; ++k) {
      CHECK(std::abs(s.bins[0](k, n) - dft_bin(frame, k)) < 1e-10);
    }
  }
}

TEST_CASE("bin-centred tone concentrates in its bin", "[stft]") {
  MultiChannelAudio a;
  a.sample_rate = 8000;
  const double f = 40 * 8000.0 / 512;
  a.samples = sine_row(f, 8000, 4096);
  const auto s = stft(a);
  for (Index n = 0; n < s.num_frames(); ++n) {
    double total = 0;
    for (Index k = 0; k < s.num_bins(); ++k) total += std::norm(s.bins[0](k, n));
    CHECK(std::norm(s.bins[0](40, n)) / total >= 0.6);
    const double main_lobe = std::norm(s.bins[0](39, n)) + std::norm(s.bins[0](40, n)) + std::norm(s.bins[0](41, n));
    CHECK(main_lobe / total >= 0.9);
  }
}

TEST_CASE("one-sided Parseval recovers windowed frame energy", "[stft]") {
  MultiChannelAudio a;
  a.sample_rate = 8000;
  a.samples = Eigen::MatrixXd::Random(1, 2048);
  const auto s = stft(a);
  const auto w = hann_window<double>(512);
  for (Index n = 0; n < s.num_frames(); ++n) {
    const double direct = a.samples.row(0).segment(n * 256, 512).transpose().cwiseProduct(w).squaredNorm();
    CHECK_THAT(frame_energy_from_bins(s, 0, n), WithinRel(direct, 1e-10));
  }
}

TEST_CASE("wav and raw float round trips", "[audio_io]") {
  const auto dir = std::filesystem::temp_directory_path() / "dirfocus_test_audio";
  std::filesystem::create_directories(dir);
  MultiChannelAudio a;
  a.sample_rate = 16000;
  a.samples = Eigen::MatrixXd::Random(2, 300) * 0.5;

  write_wav(dir / "a.wav", a);
  const auto b = read_wav(dir / "a.wav");
  CHECK(b.sample_rate == 16000);
  REQUIRE(b.samples.rows() == 2);
  REQUIRE(b.samples.cols() == 300);
  CHECK((b.samples - a.samples).cwiseAbs().maxCoeff() < 1e-7);

  write_raw_f32(dir / "a.f32", a);
  const auto c = load_audio(dir / "a.f32");
  CHECK(c.sample_rate == 16000);
  CHECK((c.samples - a.samples).cwiseAbs().maxCoeff() < 1e-7);

  CHECK_THROWS(read_wav(dir / "missing.wav"));
  std::filesystem::remove_all(dir);
}
