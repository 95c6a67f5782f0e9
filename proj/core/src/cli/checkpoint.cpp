#include "d2v/cli/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "d2v/enc/text.h"
#include "d2v/error.h"

namespace d2v::cli {

namespace {

constexpr char kMagic[8] = {'D', '2', 'V', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > bytes_.size() - pos_)
      throw FormatError(std::string("checkpoint truncated while reading ") + what + " at byte " + std::to_string(pos_));
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json header_json(const CheckpointHeader& h) {
  return {{"format_version", h.format_version},
          {"config_hash", h.config_hash},
          {"model_kind", h.model_kind},
          {"model_config", h.model_config},
          {"metrics", h.metrics}};
}

}  // namespace

std::string checkpoint_bytes(const CheckpointHeader& header, const num::ParameterStore& params) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header.format_version));
  const std::string h = header_json(header).dump();
  put<std::uint64_t>(out, h.size());
  out += h;
  put<std::uint64_t>(out, params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) put<std::uint64_t>(out, d);
    for (double v : p.value.values()) put<double>(out, v);
  }
  put<std::uint64_t>(out, enc::fnv1a64(out));
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header,
                     const num::ParameterStore& params) {
  const std::string bytes = checkpoint_bytes(header, params);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic))
    throw FormatError("not a checkpoint file (bad magic)");
  Checkpoint ck;
  const auto version = r.get<std::uint32_t>("format version");
  if (version != static_cast<std::uint32_t>(kCheckpointVersion))
    throw FormatError("unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto hlen = r.get<std::uint64_t>("header length");
  const std::string htext = r.take(hlen, "header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(htext);
    ck.header.format_version = h.at("format_version").get<int>();
    ck.header.config_hash = h.at("config_hash").get<std::string>();
    ck.header.model_kind = h.at("model_kind").get<std::string>();
    ck.header.model_config = h.at("model_config");
    ck.header.metrics = h.at("metrics");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is malformed: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>("block count");
  for (std::uint64_t b = 0; b < count; ++b) {
    const auto nlen = r.get<std::uint32_t>("block name length");
    std::string name = r.take(nlen, "block name");
    const auto rank = r.get<std::uint32_t>("block rank");
    if (rank > 8) throw FormatError("block " + name + ": implausible rank " + std::to_string(rank));
    num::Shape shape;
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape.push_back(r.get<std::uint64_t>("block shape"));
      if (shape.back() != 0 && n > (bytes.size() / 8) / shape.back())
        throw FormatError("block " + name + ": shape exceeds the file size");
      n *= shape.back();
    }
    std::vector<double> values(n);
    for (auto& v : values) v = r.get<double>("block values");
    ck.blocks.emplace_back(std::move(name), num::Tensor(std::move(shape), std::move(values)));
  }
  const std::size_t body = r.pos();
  const auto checksum = r.get<std::uint64_t>("checksum");
  if (checksum != enc::fnv1a64(std::string_view(bytes).substr(0, body)))
    throw FormatError("checkpoint checksum mismatch");
  if (r.pos() != bytes.size()) throw FormatError("checkpoint has trailing bytes");
  return ck;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

void restore_parameters(const Checkpoint& checkpoint, num::ParameterStore& params) {
  for (const auto& [name, value] : checkpoint.blocks) {
    if (!params.contains(name)) throw FormatError("checkpoint block " + name + " has no matching parameter");
    const auto& p = params.get(name);
    if (p.value.shape() != value.shape())
      throw FormatError("checkpoint block " + name + " has shape " + num::shape_str(value.shape()) +
                        " but the model expects " + num::shape_str(p.value.shape()));
  }
  if (checkpoint.blocks.size() != params.size()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      bool found = false;
      for (const auto& b : checkpoint.blocks) found = found || b.first == params[i].name;
      if (!found) throw FormatError("checkpoint lacks block " + params[i].name);
    }
    throw FormatError("checkpoint repeats a block");
  }
  for (const auto& [name, value] : checkpoint.blocks) params.get(name).value = value;
}

}  // namespace d2v::cli
