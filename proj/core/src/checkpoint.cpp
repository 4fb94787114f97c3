#include "wuneng/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wuneng/error.hpp"

namespace wuneng {
namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<unsigned char>& buffer() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> data) : data_(std::move(data)) {}

  /// `what` names the item being read so truncation errors can say where.
  void need(std::size_t n, const std::string& what) const {
    if (pos_ + n > data_.size()) {
      throw CheckpointError(CheckpointErrorKind::kTruncated,
                            "checkpoint truncated while reading " + what);
    }
  }
  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const std::string& what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  double f64(const std::string& what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const std::string& what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::vector<unsigned char> data_;
  std::size_t pos_ = 0;
};

std::string config_block(const ModelConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_key_values(cfg)) out += k + "=" + v + "\n";
  return out;
}

ModelConfig parse_config_block(const std::string& block) {
  std::map<std::string, std::string> kv;
  std::istringstream in(block);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                            "malformed config line in checkpoint: '" + line + "'");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  try {
    return model_config_from(kv);
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                          std::string("invalid config in checkpoint: ") + e.what());
  }
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(CheckpointErrorKind::kIo, "cannot open checkpoint " + path.string());
  }
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.str(config_block(params.config));
  std::uint32_t count = 0;
  visit_model(params, [&](const std::string&, const TensorD&) { ++count; });
  w.u32(count);
  visit_model(params, [&](const std::string& name, const TensorD& t) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.dims()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  });
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError(CheckpointErrorKind::kIo, "cannot write checkpoint " + path.string());
  }
  const auto& buf = w.buffer();
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) {
    throw CheckpointError(CheckpointErrorKind::kIo, "write failed for " + path.string());
  }
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  Reader r(read_file(path));
  const std::string magic = r.raw(sizeof(kCheckpointMagic), "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError(CheckpointErrorKind::kBadMagic,
                          "not a checkpoint (bad magic) in " + path.string());
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorKind::kVersionMismatch,
                          "checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
  }
  const ModelConfig cfg = parse_config_block(r.str("config"));

  // The embedded config determines the expected name and shape of every tensor.
  ModelParams params;
  try {
    params = init_model(cfg);
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                          std::string("invalid config in checkpoint: ") + e.what());
  }
  const auto refs = param_refs(params);
  const std::uint32_t count = r.u32("tensor count");
  if (count != refs.size()) {
    throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                          "checkpoint holds " + std::to_string(count) +
                              " tensors, config requires " + std::to_string(refs.size()));
  }
  for (const auto& ref : refs) {
    const std::string name = r.str("tensor name after " + ref.name);
    if (name != ref.name) {
      throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                            "expected tensor '" + ref.name + "', found '" + name + "'");
    }
    const std::uint32_t rank = r.u32("rank of " + name);
    Dims dims;
    for (std::uint32_t i = 0; i < rank; ++i) dims.push_back(r.u64("dims of " + name));
    if (dims != ref.value->dims()) {
      throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                            "tensor '" + name + "' has shape " + shape_string(dims) +
                                ", config requires " + shape_string(ref.value->dims()));
    }
    r.need(ref.value->size() * 8, "payload of " + name);
    for (auto& v : ref.value->data()) v = r.f64("payload of " + name);
  }
  if (!r.at_end()) {
    throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                          "trailing bytes after the last tensor in " + path.string());
  }
  return params;
}

ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  ModelParams p = load_checkpoint(path);
  ModelParams want = init_model(expected);
  auto have_refs = param_refs(p);
  auto want_refs = param_refs(want);
  if (have_refs.size() != want_refs.size()) {
    throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                          "checkpoint has " + std::to_string(have_refs.size()) +
                              " tensors, expected config needs " +
                              std::to_string(want_refs.size()));
  }
  for (std::size_t i = 0; i < have_refs.size(); ++i) {
    if (have_refs[i].name != want_refs[i].name ||
        have_refs[i].value->dims() != want_refs[i].value->dims()) {
      throw CheckpointError(CheckpointErrorKind::kShapeMismatch,
                            "tensor '" + have_refs[i].name + "' " +
                                shape_string(have_refs[i].value->dims()) +
                                " does not match expected '" + want_refs[i].name + "' " +
                                shape_string(want_refs[i].value->dims()));
    }
  }
  return p;
}

}  // namespace wuneng
