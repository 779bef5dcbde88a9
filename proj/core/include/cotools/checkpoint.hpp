#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cotools/numerics.hpp"

namespace cotools {

enum class Dtype { F64, F32 };

struct NamedTensor {
  std::string name;
  Mat value;
};

// On-disk layout: "COTWGT01", uint64 LE header length, UTF-8 JSON header,
// then each tensor's raw little-endian payload in header order.
struct Checkpoint {
  std::string kind;                  // "lm", "judge", "retriever", ...
  std::vector<std::string> heads;    // adapter head names, empty for the LM
  std::uint64_t seed = 0;
  Dtype dtype = Dtype::F64;
  std::vector<NamedTensor> tensors;
  std::string meta_json = "{}";      // free-form JSON object
  std::string hash;                  // filled by save/load
};

inline constexpr std::string_view kCheckpointMagic = "COTWGT01";

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

// SHA-256 over names, shapes and little-endian f64 values, in order.
std::string tensors_hash(const std::vector<NamedTensor>& tensors);

// Rounds every value through float when dtype is F32 so the stored payload,
// the hash and a reload all agree.
void save_checkpoint(const std::filesystem::path& path, Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

const NamedTensor& find_tensor(const Checkpoint& ckpt, std::string_view name);
void require_shape(const Mat& m, std::size_t rows, std::size_t cols, std::string_view what);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace cotools
