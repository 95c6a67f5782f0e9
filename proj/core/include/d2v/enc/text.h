#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace d2v::enc {

// 64-bit FNV-1a over the bytes of s.
std::uint64_t fnv1a64(std::string_view s);

class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::span<const std::string> tokens) const = 0;
  // "hashed" or "precomputed".
  virtual std::string mode() const = 0;
};

// Signed feature hashing. For a token with hash h = fnv1a64(token):
// bucket = h mod dim, sign = -1 when bit 63 of h is set, else +1.
// The bucket vector is L2-normalized; an all-cancelled vector stays zero.
class HashedTextEmbedder final : public TextEmbedder {
 public:
  explicit HashedTextEmbedder(std::size_t dim = 768);
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::span<const std::string> tokens) const override;
  std::string mode() const override { return "hashed"; }

 private:
  std::size_t dim_;
};

// Mean of per-token vectors from a lookup table. Unknown tokens are skipped
// and do not count towards the denominator.
//
// File format: first line "dim <N>", then one "token<TAB>v1 v2 ... vN" per
// line. Blank lines are ignored.
class PrecomputedTextEmbedder final : public TextEmbedder {
 public:
  PrecomputedTextEmbedder(std::size_t dim, std::unordered_map<std::string, std::vector<double>> table);
  static PrecomputedTextEmbedder read(std::istream& is);
  static PrecomputedTextEmbedder load(const std::filesystem::path& path);

  std::size_t dim() const override { return dim_; }
  // Throws ValidationError when no token is known.
  std::vector<double> embed(std::span<const std::string> tokens) const override;
  std::string mode() const override { return "precomputed"; }
  std::size_t vocabulary_size() const { return table_.size(); }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

std::unique_ptr<TextEmbedder> make_text_embedder(const std::string& mode, std::size_t dim,
                                                 const std::filesystem::path& embedding_file = {});

}  // namespace d2v::enc
