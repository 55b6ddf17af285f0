#include "plume/storage.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace plume::data {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'P', 'L', 'U', 'M', 'E', 'B', 'O', 'X'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i)
    v = (v << 8) | static_cast<std::uint8_t>(buf[off + static_cast<std::size_t>(i)]);
  return v;
}

std::uint64_t get_u64(const std::string& buf, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i)
    v = (v << 8) | static_cast<std::uint8_t>(buf[off + static_cast<std::size_t>(i)]);
  return v;
}

void put_f32(std::string& out, float f) {
  static_assert(sizeof(float) == 4);
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

float get_f32(const std::string& buf, std::size_t off) {
  return std::bit_cast<float>(get_u32(buf, off));
}

struct Section {
  std::string name;
  std::string dtype;
  std::vector<int> shape;
  std::string bytes;
};

std::string assemble(const std::string& kind, const json& meta,
                     const std::vector<Section>& sections) {
  json header;
  header["kind"] = kind;
  header["meta"] = meta;
  json table = json::array();
  std::size_t offset = 0;
  for (const auto& s : sections) {
    json entry;
    entry["name"] = s.name;
    entry["dtype"] = s.dtype;
    entry["shape"] = s.shape;
    entry["offset"] = offset;
    entry["bytes"] = s.bytes.size();
    entry["crc32"] = crc32(s.bytes.data(), s.bytes.size());
    table.push_back(entry);
    offset += s.bytes.size();
  }
  header["sections"] = table;
  const std::string header_text = header.dump();

  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kContainerVersion);
  put_u64(out, header_text.size());
  out += header_text;
  for (const auto& s : sections) out += s.bytes;
  return out;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw StorageError("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw StorageError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw StorageError("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

struct Parsed {
  json header;
  std::string payload;
};

Parsed parse(const std::string& bytes, const std::string& expected_kind,
             const std::string& path) {
  if (bytes.size() < sizeof(kMagic) + 12)
    throw TruncatedPayloadError("container too short: " + path);
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw StorageError("not a container file: " + path);
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kContainerVersion)
    throw VersionMismatchError("container version " + std::to_string(version) +
                               " (expected " + std::to_string(kContainerVersion) +
                               "): " + path);
  const std::uint64_t header_len = get_u64(bytes, 12);
  const std::size_t header_start = sizeof(kMagic) + 12;
  if (bytes.size() < header_start + header_len)
    throw TruncatedPayloadError("header truncated: " + path);

  Parsed out;
  try {
    out.header = json::parse(bytes.substr(header_start, header_len));
  } catch (const json::exception& e) {
    throw StorageError("bad container header (" + std::string(e.what()) + "): " + path);
  }
  if (out.header.value("kind", "") != expected_kind)
    throw StorageError("container kind '" + out.header.value("kind", std::string("?")) +
                       "' where '" + expected_kind + "' expected: " + path);
  out.payload = bytes.substr(header_start + header_len);
  return out;
}

std::string section_bytes(const Parsed& p, const std::string& name,
                          const std::string& path) {
  for (const auto& entry : p.header.at("sections")) {
    if (entry.at("name").get<std::string>() != name) continue;
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t count = entry.at("bytes").get<std::size_t>();
    if (offset + count > p.payload.size())
      throw TruncatedPayloadError("payload truncated at section '" + name + "': " + path);
    std::string bytes = p.payload.substr(offset, count);
    const std::uint32_t want = entry.at("crc32").get<std::uint32_t>();
    const std::uint32_t got = crc32(bytes.data(), bytes.size());
    if (want != got)
      throw ChecksumError("checksum mismatch in section '" + name + "': " + path);
    return bytes;
  }
  throw StorageError("missing section '" + name + "': " + path);
}

json model_to_json(const net::ModelConfig& m) {
  json j;
  j["variant"] = net::variant_name(m.variant);
  j["layers"] = m.layers;
  j["hidden_channels"] = m.hidden_channels;
  j["kernel_size"] = m.kernel_size;
  j["input_channels"] = m.input_channels;
  j["rows"] = m.rows;
  j["cols"] = m.cols;
  j["use_bias"] = m.use_bias;
  j["share_m_input_kernels"] = m.share_m_input_kernels;
  return j;
}

net::ModelConfig model_from_json(const json& j) {
  net::ModelConfig m;
  m.variant = net::variant_from_name(j.at("variant").get<std::string>());
  m.layers = j.at("layers").get<int>();
  m.hidden_channels = j.at("hidden_channels").get<int>();
  m.kernel_size = j.at("kernel_size").get<int>();
  m.input_channels = j.at("input_channels").get<int>();
  m.rows = j.at("rows").get<int>();
  m.cols = j.at("cols").get<int>();
  m.use_bias = j.at("use_bias").get<bool>();
  m.share_m_input_kernels = j.at("share_m_input_kernels").get<bool>();
  m.validate();
  return m;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t crc) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  const auto* p = static_cast<const std::uint8_t*>(data);
  crc = ~crc;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xff] ^ (crc >> 8);
  return ~crc;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

void save_sequence(const PlumeSequence& seq, const std::string& path) {
  const std::size_t cells = static_cast<std::size_t>(seq.rows) * seq.cols;
  if (seq.frames.empty()) throw ContractError("save_sequence: no frames");
  for (const auto& f : seq.frames)
    if (f.size() != cells) throw ContractError("save_sequence: ragged frame");
  if (seq.building_mask.size() != cells)
    throw ContractError("save_sequence: mask extent mismatch");

  json meta;
  meta["id"] = seq.id;
  meta["rows"] = seq.rows;
  meta["cols"] = seq.cols;
  meta["frames"] = seq.frame_count();
  meta["phi_rad"] = seq.phi_rad;
  meta["speed"] = seq.speed;
  meta["seed"] = seq.seed;
  meta["config_hash"] = seq.config_hash;

  Section frames;
  frames.name = "frames";
  frames.dtype = "u8";
  frames.shape = {seq.frame_count(), seq.rows, seq.cols};
  frames.bytes.reserve(seq.frames.size() * cells);
  for (const auto& f : seq.frames)
    frames.bytes.append(reinterpret_cast<const char*>(f.data()), f.size());

  Section mask;
  mask.name = "mask";
  mask.dtype = "u8";
  mask.shape = {seq.rows, seq.cols};
  mask.bytes.assign(reinterpret_cast<const char*>(seq.building_mask.data()),
                    seq.building_mask.size());

  write_file(path, assemble("sequence", meta, {frames, mask}));
}

PlumeSequence load_sequence(const std::string& path) {
  const Parsed p = parse(read_file(path), "sequence", path);
  const json& meta = p.header.at("meta");

  PlumeSequence seq;
  seq.id = meta.at("id").get<std::string>();
  seq.rows = meta.at("rows").get<int>();
  seq.cols = meta.at("cols").get<int>();
  seq.phi_rad = meta.at("phi_rad").get<double>();
  seq.speed = meta.at("speed").get<double>();
  seq.seed = meta.at("seed").get<std::uint64_t>();
  seq.config_hash = meta.at("config_hash").get<std::string>();

  const int frame_count = meta.at("frames").get<int>();
  const std::size_t cells = static_cast<std::size_t>(seq.rows) * seq.cols;

  const std::string frames = section_bytes(p, "frames", path);
  if (frames.size() != cells * static_cast<std::size_t>(frame_count))
    throw TruncatedPayloadError("frame section size mismatch: " + path);
  seq.frames.reserve(static_cast<std::size_t>(frame_count));
  for (int f = 0; f < frame_count; ++f) {
    const auto* base = reinterpret_cast<const std::uint8_t*>(frames.data()) + cells * f;
    seq.frames.emplace_back(base, base + cells);
  }

  const std::string mask = section_bytes(p, "mask", path);
  if (mask.size() != cells)
    throw TruncatedPayloadError("mask section size mismatch: " + path);
  seq.building_mask.assign(reinterpret_cast<const std::uint8_t*>(mask.data()),
                           reinterpret_cast<const std::uint8_t*>(mask.data()) + cells);
  return seq;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json meta;
  meta["model"] = model_to_json(ckpt.model);

  std::vector<Section> sections;
  for (const auto& [name, tensor] : ckpt.params) {
    Section s;
    s.name = name;
    s.dtype = "f32";
    s.shape = tensor.shape();
    s.bytes.reserve(tensor.numel() * 4);
    for (float v : tensor.values()) put_f32(s.bytes, v);
    sections.push_back(std::move(s));
  }
  write_file(path, assemble("checkpoint", meta, sections));
}

Checkpoint load_checkpoint(const std::string& path) {
  const Parsed p = parse(read_file(path), "checkpoint", path);
  Checkpoint out;
  out.model = model_from_json(p.header.at("meta").at("model"));
  for (const auto& entry : p.header.at("sections")) {
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<std::vector<int>>();
    const std::string bytes = section_bytes(p, name, path);
    if (bytes.size() != shape_numel(shape) * 4)
      throw TruncatedPayloadError("parameter '" + name + "' size mismatch: " + path);
    std::vector<float> values(shape_numel(shape));
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_f32(bytes, i * 4);
    out.params.add(name, Tensor<float>::from(shape, std::move(values)));
  }
  return out;
}

void save_predictions(const PredictionsFile& preds, const std::string& path) {
  const std::size_t cells = static_cast<std::size_t>(preds.rows) * preds.cols;
  for (const auto& f : preds.frames)
    if (f.size() != cells) throw ContractError("save_predictions: ragged frame");

  json meta;
  meta["sequence_id"] = preds.sequence_id;
  meta["rows"] = preds.rows;
  meta["cols"] = preds.cols;
  meta["t0"] = preds.t0;
  meta["input_steps"] = preds.input_steps;
  meta["frames"] = preds.frames.size();

  Section s;
  s.name = "frames";
  s.dtype = "f32";
  s.shape = {static_cast<int>(preds.frames.size()), preds.rows, preds.cols};
  for (const auto& f : preds.frames)
    for (float v : f) put_f32(s.bytes, v);
  write_file(path, assemble("predictions", meta, {s}));
}

PredictionsFile load_predictions(const std::string& path) {
  const Parsed p = parse(read_file(path), "predictions", path);
  const json& meta = p.header.at("meta");
  PredictionsFile out;
  out.sequence_id = meta.at("sequence_id").get<std::string>();
  out.rows = meta.at("rows").get<int>();
  out.cols = meta.at("cols").get<int>();
  out.t0 = meta.at("t0").get<int>();
  out.input_steps = meta.at("input_steps").get<int>();
  const std::size_t count = meta.at("frames").get<std::size_t>();
  const std::size_t cells = static_cast<std::size_t>(out.rows) * out.cols;

  const std::string bytes = section_bytes(p, "frames", path);
  if (bytes.size() != count * cells * 4)
    throw TruncatedPayloadError("prediction frames size mismatch: " + path);
  out.frames.reserve(count);
  for (std::size_t f = 0; f < count; ++f) {
    std::vector<float> frame(cells);
    for (std::size_t i = 0; i < cells; ++i)
      frame[i] = get_f32(bytes, (f * cells + i) * 4);
    out.frames.push_back(std::move(frame));
  }
  return out;
}

}  // namespace plume::data
