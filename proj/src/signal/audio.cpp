#include "dirfocus/signal/audio.hpp"

#include "dirfocus/error.hpp"

namespace dirfocus::signal {

void MultiChannelAudio::validate() const {
  if (channels() < 1) throw ParameterError("audio must have at least one channel");
  if (!(sample_rate > 0.0)) throw ParameterError("audio sample rate must be positive");
}

}  // namespace dirfocus::signal
