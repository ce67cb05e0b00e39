#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "megadance/hfdq/codec.hpp"
#include "megadance/io/json_file.hpp"

namespace megadance::hfdq {

inline constexpr const char* kCodesFormat = "megadance-codes";
inline constexpr int kCodesFormatVersion = 1;

/// Distinct-code counter over a stream of codes.
class CodeUsage {
 public:
  explicit CodeUsage(std::size_t codebook_size) : seen_(codebook_size, 0) {}

  void add(std::span<const int> codes) {
    for (int c : codes) {
      if (c < 0 || static_cast<std::size_t>(c) >= seen_.size()) {
        throw RangeError("code " + std::to_string(c) + " outside codebook of " + std::to_string(seen_.size()));
      }
      distinct_ += seen_[static_cast<std::size_t>(c)] == 0;
      ++seen_[static_cast<std::size_t>(c)];
      ++total_;
    }
  }
  std::size_t distinct() const { return distinct_; }
  std::size_t total() const { return total_; }
  std::size_t count(int code) const { return seen_.at(static_cast<std::size_t>(code)); }
  double utilization() const {
    if (total_ == 0) throw InputError("codebook utilization of an empty stream");
    return static_cast<double>(distinct_) / static_cast<double>(seen_.size());
  }

 private:
  std::vector<std::size_t> seen_;
  std::size_t distinct_ = 0;
  std::size_t total_ = 0;
};

inline double codebook_utilization(std::span<const int> codes, std::size_t codebook_size) {
  CodeUsage usage(codebook_size);
  usage.add(codes);
  return usage.utilization();
}

/// Code file layout:
///   { "format": "megadance-codes", "version": 1, "codebook_size": k, "latent_len": T',
///     "upper_codes": [...], "lower_codes": [...] }
inline std::string codes_to_text(const LatentCodes& codes, std::size_t codebook_size) {
  io::Json doc = {{"format", kCodesFormat},           {"version", kCodesFormatVersion},
                  {"codebook_size", codebook_size},   {"latent_len", codes.latent_len()},
                  {"upper_codes", codes.upper},       {"lower_codes", codes.lower}};
  return doc.dump(1) + "\n";
}

inline LatentCodes codes_from_json(const io::Json& doc, const std::string& origin, std::size_t* codebook_size = nullptr) {
  io::check_envelope(doc, kCodesFormat, kCodesFormatVersion, origin);
  const auto k = io::field_as<std::size_t>(doc, "codebook_size", origin);
  const auto len = io::field_as<std::size_t>(doc, "latent_len", origin);
  LatentCodes codes{io::field_as<std::vector<int>>(doc, "upper_codes", origin),
                    io::field_as<std::vector<int>>(doc, "lower_codes", origin)};
  for (const auto* stream : {&codes.upper, &codes.lower}) {
    if (stream->size() != len) {
      throw ValidationError(origin + ": latent_len is " + std::to_string(len) + " but a code stream holds " +
                            std::to_string(stream->size()));
    }
    for (std::size_t i = 0; i < stream->size(); ++i) {
      const int c = (*stream)[i];
      if (c < 0 || static_cast<std::size_t>(c) >= k) {
        throw ValidationError(origin + ": code " + std::to_string(c) + " at step " + std::to_string(i) +
                              " outside [0, " + std::to_string(k) + ")");
      }
    }
  }
  if (codebook_size) *codebook_size = k;
  return codes;
}

inline void write_codes(const std::filesystem::path& path, const LatentCodes& codes, std::size_t codebook_size) {
  io::write_text(path, codes_to_text(codes, codebook_size));
}

inline LatentCodes read_codes(const std::filesystem::path& path, std::size_t* codebook_size = nullptr) {
  return codes_from_json(io::read_json(path), path.string(), codebook_size);
}

}  // namespace megadance::hfdq
