#include "cotools/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cotools {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class U>
U to_le(U x) {
  if constexpr (std::endian::native == std::endian::little) {
    return x;
  } else {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      r = (r << 8) | (x & 0xff);
      x >>= 8;
    }
    return r;
  }
}

void put_u64(std::string& out, std::uint64_t v) {
  v = to_le(v);
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

void put_f32(std::string& out, float f) {
  std::uint32_t v = to_le(std::bit_cast<std::uint32_t>(f));
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  return to_le(v);
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return to_le(v);
}

const char* dtype_name(Dtype d) { return d == Dtype::F64 ? "f64" : "f32"; }

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::IoError, "EVP_Digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string tensors_hash(const std::vector<NamedTensor>& tensors) {
  std::string buf;
  for (const auto& t : tensors) {
    put_u64(buf, t.name.size());
    buf += t.name;
    put_u64(buf, t.value.rows());
    put_u64(buf, t.value.cols());
    for (double x : t.value.storage()) put_f64(buf, x);
  }
  return sha256_hex(buf);
}

void save_checkpoint(const std::filesystem::path& path, Checkpoint& ckpt) {
  if (ckpt.dtype == Dtype::F32) {
    for (auto& t : ckpt.tensors) {
      for (double& x : t.value.storage()) x = static_cast<double>(static_cast<float>(x));
    }
  }
  for (const auto& t : ckpt.tensors) require_finite(t.value, "checkpoint tensor " + t.name);
  ckpt.hash = tensors_hash(ckpt.tensors);

  json header;
  header["kind"] = ckpt.kind;
  header["heads"] = ckpt.heads;
  header["seed"] = ckpt.seed;
  header["dtype"] = dtype_name(ckpt.dtype);
  header["hash"] = ckpt.hash;
  json shapes = json::array();
  for (const auto& t : ckpt.tensors) {
    shapes.push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}});
  }
  header["tensors"] = shapes;
  header["meta"] = json::parse(ckpt.meta_json);
  const std::string htext = header.dump();

  std::string out(kCheckpointMagic);
  put_u64(out, htext.size());
  out += htext;
  for (const auto& t : ckpt.tensors) {
    for (double x : t.value.storage()) {
      if (ckpt.dtype == Dtype::F64) {
        put_f64(out, x);
      } else {
        put_f32(out, static_cast<float>(x));
      }
    }
  }
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  const auto corrupt = [&](const std::string& why) {
    return Error(Errc::CorruptCheckpoint, path.string() + ": " + why);
  };
  if (buf.size() < 16 || std::string_view(buf).substr(0, 8) != kCheckpointMagic) {
    throw corrupt("bad magic");
  }
  const std::uint64_t hlen = get_u64(buf.data() + 8);
  if (hlen > buf.size() - 16) throw corrupt("header length exceeds file");
  json header;
  try {
    header = json::parse(buf.substr(16, hlen));
  } catch (const json::exception& e) {
    throw corrupt(std::string("header is not JSON: ") + e.what());
  }

  Checkpoint ck;
  std::size_t pos = 16 + hlen;
  try {
    ck.kind = header.at("kind").get<std::string>();
    ck.heads = header.at("heads").get<std::vector<std::string>>();
    ck.seed = header.at("seed").get<std::uint64_t>();
    const std::string dt = header.at("dtype").get<std::string>();
    if (dt == "f64") {
      ck.dtype = Dtype::F64;
    } else if (dt == "f32") {
      ck.dtype = Dtype::F32;
    } else {
      throw corrupt("unknown dtype " + dt);
    }
    ck.meta_json = header.at("meta").dump();
    const std::size_t width = ck.dtype == Dtype::F64 ? 8 : 4;
    for (const auto& t : header.at("tensors")) {
      const auto r = t.at("shape").at(0).get<std::size_t>();
      const auto c = t.at("shape").at(1).get<std::size_t>();
      if (r != 0 && c > (buf.size() - pos) / width / r) throw corrupt("truncated payload");
      std::vector<double> xs(r * c);
      for (std::size_t i = 0; i < xs.size(); ++i, pos += width) {
        if (ck.dtype == Dtype::F64) {
          xs[i] = std::bit_cast<double>(get_u64(buf.data() + pos));
        } else {
          xs[i] = static_cast<double>(std::bit_cast<float>(get_u32(buf.data() + pos)));
        }
      }
      ck.tensors.push_back({t.at("name").get<std::string>(), Mat(r, c, std::move(xs))});
    }
    ck.hash = header.at("hash").get<std::string>();
  } catch (const json::exception& e) {
    throw corrupt(std::string("malformed header: ") + e.what());
  }
  if (pos != buf.size()) throw corrupt("trailing bytes after payload");
  if (tensors_hash(ck.tensors) != ck.hash) throw corrupt("content hash mismatch");
  return ck;
}

const NamedTensor& find_tensor(const Checkpoint& ckpt, std::string_view name) {
  for (const auto& t : ckpt.tensors) {
    if (t.name == name) return t;
  }
  throw Error(Errc::CorruptCheckpoint, "checkpoint has no tensor " + std::string(name));
}

void require_shape(const Mat& m, std::size_t rows, std::size_t cols, std::string_view what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(Errc::ShapeMismatch, std::string(what) + ": expected " + std::to_string(rows) + "x" +
                                         std::to_string(cols) + ", got " + std::to_string(m.rows()) +
                                         "x" + std::to_string(m.cols()));
  }
}

}  // namespace cotools
