#pragma once

#include "agfm/model.hpp"
#include "agfm/pretrain.hpp"
#include "agfm/prompt.hpp"
#include "agfm/rng.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

// Container layout, all integers little-endian:
//   "AGFM" | u32 version | u32 kind | u64 header length | JSON header | payload
// The payload is every tensor of the header's manifest, in order, as float32.

namespace agfm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { model = 0, prompt = 1 };

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// "fnv1a64:" followed by 16 lowercase hex digits of the payload hash.
inline std::string content_hash(std::string_view payload) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(payload)));
  return buf;
}

namespace detail {

inline constexpr std::string_view kMagic = "AGFM";
inline constexpr std::size_t kPreambleSize = 4 + 4 + 4 + 8;

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(std::string_view in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

template <typename T>
nlohmann::json manifest(const std::vector<TensorView<T>>& tensors) {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& t : tensors) m.push_back({{"name", t.name}, {"shape", t.shape}});
  return m;
}

template <typename T>
std::string pack_payload(const std::vector<TensorView<T>>& tensors) {
  std::string out;
  for (const auto& t : tensors) {
    for (float v : t.data) put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  }
  return out;
}

inline std::string encode(CheckpointKind kind, nlohmann::json header, const std::string& payload) {
  header["content_hash"] = content_hash(payload);
  const std::string text = header.dump();
  std::string out(kMagic);
  put_le(out, kCheckpointVersion, 4);
  put_le(out, static_cast<std::uint32_t>(kind), 4);
  put_le(out, text.size(), 8);
  out += text;
  out += payload;
  return out;
}

struct Container {
  nlohmann::json header;
  std::string_view payload;
};

inline Container decode(std::string_view bytes, CheckpointKind expected) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw CheckpointError("bad magic: not an AGFM checkpoint");
  }
  if (bytes.size() < kPreambleSize) throw CheckpointError("truncated checkpoint preamble");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto kind = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  if (kind != static_cast<std::uint32_t>(expected)) {
    throw CheckpointError("checkpoint kind " + std::to_string(kind) + " where " +
                          std::to_string(static_cast<std::uint32_t>(expected)) + " was expected");
  }
  const std::uint64_t header_len = get_le(bytes, 12, 8);
  if (header_len > bytes.size() - kPreambleSize) throw CheckpointError("truncated checkpoint header");
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.substr(kPreambleSize, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  c.payload = bytes.substr(kPreambleSize + header_len);

  std::uint64_t expected_bytes = 0;
  try {
    for (const auto& t : c.header.at("tensors")) {
      std::uint64_t count = 1;
      for (const auto& s : t.at("shape")) count *= s.get<std::uint64_t>();
      expected_bytes += 4 * count;
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed tensor manifest: ") + e.what());
  }
  if (c.payload.size() < expected_bytes) {
    throw CheckpointError("truncated checkpoint payload: " + std::to_string(c.payload.size()) +
                          " of " + std::to_string(expected_bytes) + " bytes");
  }
  if (c.payload.size() > expected_bytes) {
    throw CheckpointError("checkpoint has " + std::to_string(c.payload.size() - expected_bytes) +
                          " trailing bytes");
  }
  const std::string stored = c.header.value("content_hash", std::string{});
  const std::string actual = content_hash(c.payload);
  if (stored != actual) {
    throw CheckpointError("content hash mismatch: header says " + stored + ", payload hashes to " +
                          actual);
  }
  return c;
}

/// Copies the payload into `tensors`, checking names and shapes against the
/// stored manifest.
inline void unpack_payload(const Container& c, const std::vector<TensorView<float>>& tensors) {
  const auto& m = c.header.at("tensors");
  if (m.size() != tensors.size()) {
    throw CheckpointError("manifest lists " + std::to_string(m.size()) + " tensors, expected " +
                          std::to_string(tensors.size()));
  }
  std::size_t pos = 0;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto& t = tensors[k];
    if (m[k].at("name").get<std::string>() != t.name ||
        m[k].at("shape").get<std::vector<std::size_t>>() != t.shape) {
      throw CheckpointError("manifest entry " + std::to_string(k) + " (" +
                            m[k].at("name").get<std::string>() + ") does not match " + t.name);
    }
    for (float& v : t.data) {
      v = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(c.payload, pos, 4)));
      pos += 4;
    }
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

}  // namespace detail

inline nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs}, {"lr", cfg.lr},       {"alpha", cfg.alpha},
          {"hidden", cfg.hidden}, {"proto_dim", cfg.proto_dim}, {"dprime", cfg.dprime},
          {"mu", cfg.mu},         {"sigma", cfg.sigma}, {"seed", cfg.seed}};
}

/// A decoded model checkpoint. `config` is the training configuration echo
/// (null when none was stored).
struct ModelCheckpoint {
  ModelParameters<float> model;
  nlohmann::json config;
  std::string hash;
};

inline std::string model_hash(const ModelParameters<float>& model) {
  return content_hash(detail::pack_payload(const_cast<ModelParameters<float>&>(model).tensors()));
}

inline std::string encode_model(const ModelParameters<float>& model,
                                const nlohmann::json& config = nullptr) {
  const auto tensors = const_cast<ModelParameters<float>&>(model).tensors();
  const ModelDims& d = model.dims;
  nlohmann::json header = {
      {"kind", "model"},
      {"dims",
       {{"dprime", d.input}, {"hidden", d.hidden}, {"repr", d.repr}, {"proto", d.proto()},
        {"classifier_hidden", d.classifier_hidden()}}},
      {"config", config},
      {"tensors", detail::manifest(tensors)}};
  if (config.is_object() && config.contains("seed")) header["seed"] = config["seed"];
  return detail::encode(CheckpointKind::model, std::move(header), detail::pack_payload(tensors));
}

inline ModelCheckpoint decode_model(std::string_view bytes) {
  const detail::Container c = detail::decode(bytes, CheckpointKind::model);
  ModelCheckpoint out;
  try {
    const auto& d = c.header.at("dims");
    ModelDims dims{d.at("dprime").get<std::size_t>(), d.at("hidden").get<std::size_t>(),
                   d.at("repr").get<std::size_t>()};
    if (dims.input == 0 || dims.hidden == 0 || dims.repr == 0) {
      throw CheckpointError("checkpoint dims must be positive");
    }
    ModelParameters<float>& m = out.model;
    m.dims = dims;
    const auto di = static_cast<Eigen::Index>(dims.input), h = static_cast<Eigen::Index>(dims.hidden),
               r = static_cast<Eigen::Index>(dims.repr);
    m.w1.resize(di, h);
    m.w2.resize(h, r);
    m.clf_w1.resize(r, r);
    m.clf_b1.resize(r);
    m.clf_w2.resize(r);
    m.clf_b2.resize(1);
    m.z_normal.resize(r);
    m.z_abnormal.resize(r);
    m.theta_normal_w.resize(r, r);
    m.theta_normal_b.resize(r);
    m.theta_abnormal_w.resize(r, r);
    m.theta_abnormal_b.resize(r);
    detail::unpack_payload(c, m.tensors());
    out.config = c.header.value("config", nlohmann::json());
    out.hash = c.header.at("content_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed model header: ") + e.what());
  }
  return out;
}

inline std::string save_model(const std::filesystem::path& path, const ModelParameters<float>& model,
                              const nlohmann::json& config = nullptr) {
  detail::write_file(path, encode_model(model, config));
  return model_hash(model);
}

inline ModelCheckpoint load_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file(path));
}

inline std::string encode_prompt(const PromptParameters& prompt) {
  const auto tensors = const_cast<PromptParameters&>(prompt).tensors();
  nlohmann::json header = {{"kind", "prompt"},
                           {"target", to_string(prompt.target)},
                           {"dim", prompt.dim()},
                           {"tune", {{"epochs", prompt.tune_epochs}, {"lr", prompt.tune_lr}}},
                           {"svd_seed", prompt.svd_seed},
                           {"shots", prompt.shots},
                           {"model_hash", prompt.model_hash},
                           {"tensors", detail::manifest(tensors)}};
  return detail::encode(CheckpointKind::prompt, std::move(header), detail::pack_payload(tensors));
}

/// Decodes a prompt. When `model_hash` is given, the prompt must have been
/// tuned against that model.
inline PromptParameters decode_prompt(std::string_view bytes,
                                      const std::optional<std::string>& model_hash = std::nullopt) {
  const detail::Container c = detail::decode(bytes, CheckpointKind::prompt);
  PromptParameters p;
  try {
    const auto& h = c.header;
    const auto dim = h.at("dim").get<std::size_t>();
    p = zero_prompt(dim, parse_prompt_target(h.at("target").get<std::string>()));
    p.tune_epochs = h.at("tune").at("epochs").get<std::size_t>();
    p.tune_lr = h.at("tune").at("lr").get<double>();
    p.svd_seed = h.at("svd_seed").get<std::uint64_t>();
    p.shots = h.at("shots").get<std::vector<NodeId>>();
    p.model_hash = h.at("model_hash").get<std::string>();
    detail::unpack_payload(c, p.tensors());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed prompt header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("malformed prompt header: ") + e.what());
  }
  if (model_hash && p.model_hash != *model_hash) {
    throw CheckpointError("prompt was tuned on model " + p.model_hash +
                          " but the supplied model hashes to " + *model_hash);
  }
  return p;
}

inline void save_prompt(const std::filesystem::path& path, const PromptParameters& prompt) {
  detail::write_file(path, encode_prompt(prompt));
}

inline PromptParameters load_prompt(const std::filesystem::path& path,
                                    const std::optional<std::string>& model_hash = std::nullopt) {
  return decode_prompt(detail::read_file(path), model_hash);
}

}  // namespace agfm
