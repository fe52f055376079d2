#include "dirfocus/dataset/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <numeric>
#include <unsupported/Eigen/FFT>

#include "dirfocus/error.hpp"

namespace dirfocus::dataset {

namespace {

constexpr std::uint64_t kRosterStream = 1;
constexpr std::uint64_t kPatternStream = 2;
constexpr std::uint64_t kSubjectStream = 1000;
constexpr std::uint64_t kStimulusStream = 100000;
constexpr std::uint64_t kTrialStream = 200000;

Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

// White Gaussian noise reshaped by an amplitude response over frequency (Hz),
// then scaled to unit standard deviation.
Eigen::VectorXd shaped_noise(Index length, double fs, const std::function<double(double)>& amplitude, Rng& rng) {
  const Index n = next_pow2(length);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> white(static_cast<std::size_t>(n));
  for (auto& v : white) v = gauss(rng);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, white);
  for (Index k = 0; k < n; ++k) {
    const Index kk = k <= n / 2 ? k : n - k;
    spec[static_cast<std::size_t>(k)] *= amplitude(static_cast<double>(kk) * fs / static_cast<double>(n));
  }
  std::vector<double> out;
  fft.inv(out, spec);
  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(out.data(), length);
  x.array() -= x.mean();
  const double sd = std::sqrt(x.squaredNorm() / static_cast<double>(length));
  if (sd > 0) x /= sd;
  return x;
}

Eigen::VectorXd unit_rms(Eigen::VectorXd v) {
  const double rms = std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
  return rms > 0 ? Eigen::VectorXd(v / rms) : v;
}

Eigen::VectorXd random_pattern(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(kEegChannels);
  for (Index c = 0; c < kEegChannels; ++c) v[c] = gauss(rng);
  return unit_rms(std::move(v));
}

int direction_index(int direction) {
  const auto it = std::find(kDirections.begin(), kDirections.end(), direction);
  return static_cast<int>(it - kDirections.begin());
}

struct PatternBank {
  std::array<Eigen::VectorXd, 2> side;
  std::array<Eigen::VectorXd, 4> quadrant;
  std::array<Eigen::VectorXd, 14> direction;

  explicit PatternBank(std::uint64_t seed) {
    Rng rng = make_rng(seed, kPatternStream);
    for (auto& v : side) v = random_pattern(rng);
    for (auto& v : quadrant) v = random_pattern(rng);
    for (auto& v : direction) v = random_pattern(rng);
  }

  Eigen::VectorXd pattern(int dir, EegSignature signature) const {
    const int s = dir > 0 ? 1 : 0;
    if (signature == EegSignature::Side) return side[static_cast<std::size_t>(s)];
    const int q = 2 * s + (std::abs(dir) > 90 ? 1 : 0);
    return unit_rms(side[static_cast<std::size_t>(s)] + 0.7 * quadrant[static_cast<std::size_t>(q)] +
                    0.5 * direction[static_cast<std::size_t>(direction_index(dir))]);
  }
};

}  // namespace

std::string to_string(EegSignature signature) {
  return signature == EegSignature::Side ? "side" : "direction";
}

EegSignature parse_eeg_signature(std::string_view name) {
  if (name == "direction") return EegSignature::Direction;
  if (name == "side") return EegSignature::Side;
  throw ParameterError("unknown EEG signature '" + std::string(name) + "' (expected direction or side)");
}

void SynthConfig::validate() const {
  if (n_subjects < 1) throw ParameterError("synth needs at least one subject");
  if (trials_per_subject < 1) throw ParameterError("synth needs at least one trial per subject");
  if (!(trial_seconds > 0)) throw ParameterError("trial_seconds must be positive");
  if (!(audio_seconds > 0)) throw ParameterError("audio_seconds must be positive");
  if (static_cast<Index>(audio_seconds * pipeline.analysis_rate) < pipeline.window_len)
    throw ParameterError("audio_seconds is shorter than one STFT window");
  if (!std::isfinite(snr_db)) throw ParameterError("snr_db must be finite");
  if (!(planted_eeg_gain >= 0)) throw ParameterError("planted_eeg_gain must be >= 0");
  if (!(subject_variability >= 0)) throw ParameterError("subject_variability must be >= 0");
  if (n_stimuli < 2 || n_stimuli % 2 != 0) throw ParameterError("synth needs a positive even number of stimuli");
  if (!(rear_shadow_hz > 0)) throw ParameterError("rear_shadow_hz must be positive");
  if (!(rear_delay_scale > 0)) throw ParameterError("rear_delay_scale must be positive");
  pipeline.geometry.validate();
}

std::vector<TrialMeta> synth_roster(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = make_rng(seed, kRosterStream);
  const int n = config.trials_per_subject;
  std::vector<TrialMeta> out;
  out.reserve(static_cast<std::size_t>(config.n_subjects * n));
  for (int s = 0; s < config.n_subjects; ++s) {
    std::vector<int> dirs;
    for (int rep = 0; rep < n / 14; ++rep) dirs.insert(dirs.end(), kDirections.begin(), kDirections.end());
    std::vector<int> extra(kDirections.begin(), kDirections.end());
    std::shuffle(extra.begin(), extra.end(), rng);
    dirs.insert(dirs.end(), extra.begin(), extra.begin() + n % 14);
    std::shuffle(dirs.begin(), dirs.end(), rng);

    std::vector<int> audio;
    while (static_cast<int>(audio.size()) < n) {
      std::vector<int> perm(static_cast<std::size_t>(config.n_stimuli));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      audio.insert(audio.end(), perm.begin(), perm.end());
    }
    for (int i = 0; i < n; ++i) {
      out.push_back({s, s * n + i, i, dirs[static_cast<std::size_t>(i)], audio[static_cast<std::size_t>(i)]});
    }
  }
  return out;
}

double stimulus_pitch(int stimulus_id) {
  if (stimulus_id < 0) throw ParameterError("stimulus id must be >= 0");
  const int slot = (stimulus_id / 2) % 8;
  return stimulus_id % 2 == 0 ? 104.0 + 1.7 * slot : 184.0 + 2.3 * slot;
}

Eigen::VectorXd speech_like_source(Index length, double sample_rate, double f0_hz, Rng& rng) {
  if (!(f0_hz > 0)) throw ParameterError("pitch must be positive");
  const double top = std::min(3800.0, 0.475 * sample_rate);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Eigen::VectorXd voiced = Eigen::VectorXd::Zero(length);
  for (int h = 1; h * f0_hz <= top; ++h) {
    const double f = h * f0_hz;
    const double amp = 1.0 / (1.0 + f / 500.0);
    const double w = 2.0 * std::numbers::pi * f / sample_rate;
    const double p0 = phase(rng);
    for (Index t = 0; t < length; ++t) voiced[t] += amp * std::sin(w * static_cast<double>(t) + p0);
  }
  voiced = unit_rms(std::move(voiced));
  const Eigen::VectorXd breath = shaped_noise(
      length, sample_rate, [top](double f) { return (f < 80.0 || f > top) ? 0.0 : 1.0 / (1.0 + f / 500.0); }, rng);
  const Eigen::VectorXd env =
      shaped_noise(length, sample_rate, [](double f) { return (f < 1.0 || f > 6.0) ? 0.0 : 1.0; }, rng);
  Eigen::VectorXd x = voiced + 0.1 * breath;
  x.array() *= (0.6 * env.array()).exp();
  return unit_rms(std::move(x));
}

Eigen::VectorXd fractional_delay(const Eigen::VectorXd& x, double delay_samples) {
  if (!std::isfinite(delay_samples)) throw ParameterError("delay must be finite");
  const Index n = next_pow2(x.size() + 2 * static_cast<Index>(std::ceil(std::abs(delay_samples))) + 64);
  std::vector<double> buf(static_cast<std::size_t>(n), 0.0);
  std::copy(x.data(), x.data() + x.size(), buf.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, buf);
  for (Index k = 0; k < n; ++k) {
    const double kk = k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k - n);
    spec[static_cast<std::size_t>(k)] *= std::polar(1.0, -2.0 * std::numbers::pi * kk * delay_samples / static_cast<double>(n));
  }
  if (n % 2 == 0) spec[static_cast<std::size_t>(n / 2)] = spec[static_cast<std::size_t>(n / 2)].real();
  std::vector<double> out;
  fft.inv(out, spec);
  return Eigen::Map<Eigen::VectorXd>(out.data(), x.size());
}

signal::MultiChannelAudio render_scene(const std::vector<SceneSource>& sources, const SceneOptions& options,
                                       Rng& rng) {
  options.geometry.validate();
  if (!(options.rear_delay_scale > 0)) throw ParameterError("rear_delay_scale must be positive");
  if (sources.empty()) throw ParameterError("scene needs at least one source");
  const Index length = sources.front().signal.size();
  for (const auto& s : sources) {
    if (s.signal.size() != length) throw ParameterError("scene sources must have equal length");
    if (!(s.azimuth_deg > -180.0 && s.azimuth_deg <= 180.0)) throw ParameterError("source azimuth outside (-180, 180]");
  }
  const double fs = options.sample_rate;
  const Index n = next_pow2(length + 256);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> left(static_cast<std::size_t>(n)), right(static_cast<std::size_t>(n));

  for (const auto& src : sources) {
    std::vector<double> buf(static_cast<std::size_t>(n), 0.0);
    std::copy(src.signal.data(), src.signal.data() + length, buf.begin());
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, buf);
    // Half the inter-microphone lead on each side keeps the pair centred.
    const bool rear = std::abs(src.azimuth_deg) > 90.0;
    const double half_lead = 0.5 * options.geometry.lead_time(src.azimuth_deg) * (rear ? options.rear_delay_scale : 1.0);
    for (Index k = 0; k < n; ++k) {
      const double kk = k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k - n);
      const double f = kk * fs / static_cast<double>(n);
      const double w = 2.0 * std::numbers::pi * f;
      const double shadow =
          rear ? 1.0 / std::sqrt(1.0 + (f / options.rear_shadow_hz) * (f / options.rear_shadow_hz)) : 1.0;
      const auto s = shadow * spec[static_cast<std::size_t>(k)];
      left[static_cast<std::size_t>(k)] += s * std::polar(1.0, -w * half_lead);
      right[static_cast<std::size_t>(k)] += s * std::polar(1.0, w * half_lead);
    }
  }
  if (n % 2 == 0) {
    left[static_cast<std::size_t>(n / 2)] = left[static_cast<std::size_t>(n / 2)].real();
    right[static_cast<std::size_t>(n / 2)] = right[static_cast<std::size_t>(n / 2)].real();
  }

  std::vector<double> l, r;
  fft.inv(l, left);
  fft.inv(r, right);
  signal::MultiChannelAudio audio;
  audio.sample_rate = fs;
  audio.samples.resize(2, length);
  const double noise_sd = std::pow(10.0, -options.snr_db / 20.0);
  std::normal_distribution<double> gauss(0.0, noise_sd);
  for (Index t = 0; t < length; ++t) {
    audio.samples(0, t) = l[static_cast<std::size_t>(t)] + gauss(rng);
    audio.samples(1, t) = r[static_cast<std::size_t>(t)] + gauss(rng);
  }
  return audio;
}

std::vector<EegTrial> synth_generate(const SynthConfig& config, std::uint64_t seed) {
  const auto roster = synth_roster(config, seed);
  const PatternBank bank(seed);
  const Index eeg_len = static_cast<Index>(std::llround(config.trial_seconds * kEegSampleRate));
  const double fs = config.pipeline.analysis_rate;
  const Index audio_len = static_cast<Index>(std::llround(config.audio_seconds * fs));
  const double gain = config.planted_eeg_gain;

  SceneOptions scene;
  scene.sample_rate = fs;
  scene.geometry = config.pipeline.geometry;
  scene.snr_db = config.snr_db;
  scene.rear_shadow_hz = config.rear_shadow_hz;
  scene.rear_delay_scale = config.rear_delay_scale;

  std::vector<Eigen::VectorXd> stimuli(static_cast<std::size_t>(config.n_stimuli));
  for (int id = 0; id < config.n_stimuli; ++id) {
    Rng rng = make_rng(seed, kStimulusStream + static_cast<std::uint64_t>(id));
    stimuli[static_cast<std::size_t>(id)] = speech_like_source(audio_len, fs, stimulus_pitch(id), rng);
  }

  // Per-subject perturbation of every planted pattern.
  std::vector<std::array<Eigen::VectorXd, 14>> subject_patterns(static_cast<std::size_t>(config.n_subjects));
  for (int s = 0; s < config.n_subjects; ++s) {
    Rng rng = make_rng(seed, kSubjectStream + static_cast<std::uint64_t>(s));
    for (std::size_t d = 0; d < kDirections.size(); ++d) {
      const Eigen::VectorXd jitter = random_pattern(rng);
      subject_patterns[static_cast<std::size_t>(s)][d] =
          unit_rms(bank.pattern(kDirections[d], config.signature) + config.subject_variability * jitter);
    }
  }

  std::vector<EegTrial> trials;
  trials.reserve(roster.size());
  for (const auto& m : roster) {
    Rng rng = make_rng(seed, kTrialStream + static_cast<std::uint64_t>(m.trial_id));
    EegTrial t;
    t.subject_id = m.subject_id;
    t.trial_id = m.trial_id;
    t.trial_order = m.trial_order;
    t.attended_direction = m.attended_direction;
    t.unattended_direction = -m.attended_direction;
    t.attended_audio_id = m.attended_audio_id;

    // The competing talker comes from the other voice register.
    std::uniform_int_distribution<int> other(0, config.n_stimuli / 2 - 1);
    const int unattended_audio = (2 * other(rng) + 1 - m.attended_audio_id % 2) % config.n_stimuli;
    std::vector<SceneSource> sources = {
        {stimuli[static_cast<std::size_t>(m.attended_audio_id)], static_cast<double>(t.attended_direction)},
        {stimuli[static_cast<std::size_t>(unattended_audio)], static_cast<double>(t.unattended_direction)}};
    auto audio = render_scene(sources, scene, rng);
    t.spectrum = spatial::spatial_spectrum_from_audio(audio, config.pipeline);
    if (config.keep_audio) t.audio = std::move(audio);

    t.eeg.resize(kEegChannels, eeg_len);
    for (Index c = 0; c < kEegChannels; ++c) {
      t.eeg.row(c) = shaped_noise(
                         eeg_len, kEegSampleRate, [](double f) { return f < 0.5 ? 0.0 : 1.0 / std::sqrt(f); }, rng)
                         .transpose();
    }
    if (gain > 0) {
      const Eigen::VectorXd carrier = shaped_noise(
          eeg_len, kEegSampleRate, [](double f) { return (f < 4.0 || f > 8.0) ? 0.0 : 1.0; }, rng);
      const auto& w =
          subject_patterns[static_cast<std::size_t>(m.subject_id)][static_cast<std::size_t>(direction_index(m.attended_direction))];
      t.eeg.noalias() += gain * w * carrier.transpose();
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

}  // namespace dirfocus::dataset
