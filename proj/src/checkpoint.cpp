#include "scenecode/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace scenecode {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'C', 'N', 'C', 'K', 'P', 'T', '\0'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    out_.append(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_bytes(const std::string& s) {
    put<std::uint64_t>(s.size());
    out_ += s;
  }
  void put_matrix(const Matrix& m) {
    out_.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_bytes(const char* what) {
    const auto n = get<std::uint64_t>(what);
    need(n, what);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  void get_matrix(Matrix& m, const char* what) {
    const std::size_t n = sizeof(double) * static_cast<std::size_t>(m.size());
    need(n, what);
    std::memcpy(m.data(), data_ + pos_, n);
    pos_ += n;
  }
  [[nodiscard]] std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > size_ - pos_) throw CheckpointError(std::string("corrupt checkpoint: truncated while reading ") + what);
  }
  const char* data_;
  std::size_t size_;
  std::size_t pos_{0};
};

std::string first_differing_field(const DecoderConfig& a, const DecoderConfig& b) {
  const auto ja = decoder_config_to_json(a);
  const auto jb = decoder_config_to_json(b);
  for (const auto& [key, value] : ja.items()) {
    if (jb.at(key) != value) return key;
  }
  return "";
}

}  // namespace

std::string encode_checkpoint(const DecoderModel& model, const AdamState* optimizer) {
  const auto params = model.params().params();
  Writer w;
  w.str().append(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put_bytes(decoder_config_to_json(model.config()).dump());
  w.put<std::uint64_t>(params.size());
  for (const nn::Param* p : params) {
    w.put_bytes(p->name);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(p->value.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(p->value.cols()));
    w.put_matrix(p->value);
  }
  w.put<std::uint8_t>(optimizer ? 1 : 0);
  if (optimizer) {
    if (optimizer->m.size() != params.size() || optimizer->v.size() != params.size()) {
      throw CheckpointError("optimizer state does not match the model's tensors");
    }
    w.put<std::int64_t>(optimizer->step);
    for (std::size_t i = 0; i < params.size(); ++i) {
      w.put_matrix(optimizer->m[i]);
      w.put_matrix(optimizer->v[i]);
    }
  }
  const std::uint64_t hash = fnv1a(w.str().data(), w.str().size());
  w.put<std::uint64_t>(hash);
  return std::move(w.str());
}

Checkpoint decode_checkpoint(const std::string& bytes, const DecoderConfig* expected) {
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("corrupt checkpoint: bad magic or truncated header");
  }
  Reader r(bytes.data() + sizeof(kMagic), bytes.size() - sizeof(kMagic));
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  std::uint64_t stored_hash;
  std::memcpy(&stored_hash, bytes.data() + bytes.size() - sizeof(stored_hash), sizeof(stored_hash));
  if (stored_hash != fnv1a(bytes.data(), bytes.size() - sizeof(stored_hash))) {
    throw CheckpointError("corrupt checkpoint: checksum mismatch");
  }

  DecoderConfig config;
  try {
    config = decoder_config_from_json(nlohmann::json::parse(r.get_bytes("config")));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: config is not JSON: ") + e.what());
  }
  if (expected && !(*expected == config)) {
    throw CheckpointError("checkpoint config differs from the runtime config in field '" +
                          first_differing_field(config, *expected) + "'");
  }

  Checkpoint ck{DecoderModel(config, 0), std::nullopt};
  auto params = ck.model.params().params();
  const auto count = r.get<std::uint64_t>("tensor count");
  if (count != params.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                          std::to_string(params.size()));
  }
  for (nn::Param* p : params) {
    const std::string name = r.get_bytes("tensor name");
    const auto rows = r.get<std::uint64_t>("tensor rows");
    const auto cols = r.get<std::uint64_t>("tensor cols");
    if (name != p->name || rows != static_cast<std::uint64_t>(p->value.rows()) ||
        cols != static_cast<std::uint64_t>(p->value.cols())) {
      throw CheckpointError("checkpoint tensor '" + name + "' does not match model tensor '" + p->name + "'");
    }
    r.get_matrix(p->value, "tensor values");
  }
  if (r.get<std::uint8_t>("optimizer flag") != 0) {
    AdamState st;
    st.step = r.get<std::int64_t>("optimizer step");
    for (const nn::Param* p : params) {
      st.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      st.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      r.get_matrix(st.m.back(), "optimizer moments");
      r.get_matrix(st.v.back(), "optimizer moments");
    }
    ck.optimizer = std::move(st);
  }
  if (r.remaining() != sizeof(std::uint64_t)) throw CheckpointError("corrupt checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const DecoderModel& model, const std::string& path, const AdamState* optimizer) {
  const std::string bytes = encode_checkpoint(model, optimizer);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path, const DecoderConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str(), expected);
}

}  // namespace scenecode
