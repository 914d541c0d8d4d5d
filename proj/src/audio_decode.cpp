// miniaudio is only used for its file decoders.
#define MA_NO_DEVICE_IO
#define MA_NO_THREADING
#define MA_NO_ENGINE
#define MA_NO_NODE_GRAPH
#define MA_NO_RESOURCE_MANAGER
#define MA_NO_GENERATION
#define MA_NO_ENCODING
#define MA_NO_MP3
#define MINIAUDIO_IMPLEMENTATION
#include "miniaudio.h"

#include <filesystem>

#include "emoconv/audio.hpp"
#include "emoconv/errors.hpp"

namespace emoconv {

DecodedAudio decode_audio_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DecodeError("audio file not found: " + path.string());

  ma_decoder_config cfg = ma_decoder_config_init(ma_format_f32, 0, 0);
  ma_decoder decoder;
  if (ma_decoder_init_file(path.string().c_str(), &cfg, &decoder) != MA_SUCCESS) {
    throw DecodeError("cannot decode audio file: " + path.string());
  }

  DecodedAudio out;
  out.channels = static_cast<int>(decoder.outputChannels);
  out.sample_rate = static_cast<int>(decoder.outputSampleRate);

  constexpr ma_uint64 kChunk = 4096;
  std::vector<float> buf(kChunk * static_cast<std::size_t>(out.channels));
  for (;;) {
    ma_uint64 read = 0;
    ma_result r = ma_decoder_read_pcm_frames(&decoder, buf.data(), kChunk, &read);
    out.interleaved.insert(out.interleaved.end(), buf.begin(),
                           buf.begin() + static_cast<std::ptrdiff_t>(read * out.channels));
    if (r == MA_AT_END || read == 0) break;
    if (r != MA_SUCCESS) {
      ma_decoder_uninit(&decoder);
      throw DecodeError("error while decoding " + path.string());
    }
  }
  ma_decoder_uninit(&decoder);
  if (out.channels <= 0 || out.sample_rate <= 0) throw DecodeError("invalid stream format: " + path.string());
  return out;
}

}  // namespace emoconv
