#include "d2v/enc/text.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "d2v/error.h"

namespace d2v::enc {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

HashedTextEmbedder::HashedTextEmbedder(std::size_t dim) : dim_(dim) {
  D2V_REQUIRE(dim > 0, "text embedding dimension must be positive");
}

std::vector<double> HashedTextEmbedder::embed(std::span<const std::string> tokens) const {
  D2V_REQUIRE(!tokens.empty(), "cannot embed an empty token list");
  std::vector<double> v(dim_, 0.0);
  for (const auto& tok : tokens) {
    const std::uint64_t h = fnv1a64(tok);
    v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

PrecomputedTextEmbedder::PrecomputedTextEmbedder(std::size_t dim,
                                                 std::unordered_map<std::string, std::vector<double>> table)
    : dim_(dim), table_(std::move(table)) {
  D2V_REQUIRE(dim > 0, "text embedding dimension must be positive");
  for (const auto& [tok, vec] : table_) {
    if (vec.size() != dim_) throw ValidationError("embedding for '" + tok + "' has the wrong dimension");
    for (double x : vec)
      if (!std::isfinite(x)) throw ValidationError("embedding for '" + tok + "' is not finite");
  }
}

PrecomputedTextEmbedder PrecomputedTextEmbedder::read(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty()) break;
  }
  {
    std::istringstream hs(line);
    std::string key;
    if (!(hs >> key >> dim) || key != "dim" || dim == 0)
      throw FormatError("embedding file line " + std::to_string(lineno) + ": expected header 'dim <N>'");
  }
  std::unordered_map<std::string, std::vector<double>> table;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw FormatError("embedding file line " + std::to_string(lineno) + ": expected token<TAB>values");
    std::string tok = line.substr(0, tab);
    std::istringstream vs(line.substr(tab + 1));
    std::vector<double> vec;
    double x;
    while (vs >> x) vec.push_back(x);
    if (!vs.eof() || vec.size() != dim)
      throw FormatError("embedding file line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                        " numbers");
    if (!table.emplace(std::move(tok), std::move(vec)).second)
      throw FormatError("embedding file line " + std::to_string(lineno) + ": duplicate token");
  }
  return PrecomputedTextEmbedder(dim, std::move(table));
}

PrecomputedTextEmbedder PrecomputedTextEmbedder::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open embedding file: " + path.string());
  return read(is);
}

std::vector<double> PrecomputedTextEmbedder::embed(std::span<const std::string> tokens) const {
  std::vector<double> v(dim_, 0.0);
  std::size_t known = 0;
  for (const auto& tok : tokens) {
    auto it = table_.find(tok);
    if (it == table_.end()) continue;
    ++known;
    for (std::size_t i = 0; i < dim_; ++i) v[i] += it->second[i];
  }
  if (known == 0) throw ValidationError("no token of the text has a precomputed embedding");
  for (double& x : v) x /= static_cast<double>(known);
  return v;
}

std::unique_ptr<TextEmbedder> make_text_embedder(const std::string& mode, std::size_t dim,
                                                 const std::filesystem::path& embedding_file) {
  if (mode == "hashed") return std::make_unique<HashedTextEmbedder>(dim);
  if (mode == "precomputed") {
    if (embedding_file.empty()) throw ValidationError("precomputed text embedder needs an embedding file");
    auto e = std::make_unique<PrecomputedTextEmbedder>(PrecomputedTextEmbedder::load(embedding_file));
    return e;
  }
  throw ValidationError("unknown text embedder mode '" + mode + "'");
}

}  // namespace d2v::enc
