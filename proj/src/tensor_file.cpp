#include "drugprot/tensor_file.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "drugprot/common.hpp"

namespace drugprot {

namespace {

constexpr char kMagic[8] = {'D', 'P', 'T', 'E', 'N', 'S', 'O', 'R'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::vector<char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  Reader(const std::vector<char>& bytes, const std::string& origin)
      : bytes_(bytes), origin_(origin) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError(origin_ + ": truncated tensor file");
  }

 private:
  const std::vector<char>& bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

}  // namespace

const Eigen::MatrixXd& TensorFile::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("tensor '" + name + "' not present in file");
}

std::vector<char> encode_tensor_file(const TensorFile& file) {
  std::vector<char> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  const std::string header = file.header.dump();
  put_le<std::uint64_t>(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(file.tensors.size()));

  std::uint64_t offset = 0;
  for (const auto& [name, t] : file.tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le<std::uint32_t>(out, 2);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
    put_le<std::uint64_t>(out, offset);
    offset += static_cast<std::uint64_t>(t.size()) * 4;
  }
  for (const auto& [name, t] : file.tensors) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const auto f = static_cast<float>(t(r, c));
        if (!std::isfinite(f)) throw NumericError("tensor '" + name + "' has a non-finite entry");
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
      }
    }
  }
  return out;
}

TensorFile decode_tensor_file(const std::vector<char>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (r.str(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw DataError(origin + ": not a tensor file");
  }
  if (const auto v = r.get<std::uint32_t>(); v != kVersion) {
    throw DataError(origin + ": unsupported tensor file version " + std::to_string(v));
  }
  TensorFile file;
  const auto header_len = r.get<std::uint64_t>();
  try {
    file.header = nlohmann::json::parse(r.str(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": bad header: " + e.what());
  }

  struct Entry {
    std::string name;
    std::uint64_t rows, cols, offset;
  };
  const auto n = r.get<std::uint32_t>();
  std::vector<Entry> dir;
  for (std::uint32_t i = 0; i < n; ++i) {
    Entry e;
    e.name = r.str(r.get<std::uint32_t>());
    if (const auto rank = r.get<std::uint32_t>(); rank != 2) {
      throw DataError(origin + ": tensor '" + e.name + "' has unsupported rank");
    }
    e.rows = r.get<std::uint64_t>();
    e.cols = r.get<std::uint64_t>();
    e.offset = r.get<std::uint64_t>();
    dir.push_back(std::move(e));
  }
  const std::size_t data_start = r.pos();
  std::uint64_t expected = 0;
  for (const auto& e : dir) {
    if (e.offset != expected) throw DataError(origin + ": tensor directory is not contiguous");
    expected += e.rows * e.cols * 4;
  }
  if (data_start + expected != bytes.size()) {
    throw DataError(origin + ": tensor data size mismatch");
  }
  for (const auto& e : dir) {
    Eigen::MatrixXd t(static_cast<Eigen::Index>(e.rows), static_cast<Eigen::Index>(e.cols));
    std::size_t p = data_start + e.offset;
    for (Eigen::Index row = 0; row < t.rows(); ++row) {
      for (Eigen::Index col = 0; col < t.cols(); ++col) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) {
          u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[p + b])) << (8 * b);
        }
        t(row, col) = static_cast<double>(std::bit_cast<float>(u));
        p += 4;
      }
    }
    file.tensors.emplace_back(e.name, std::move(t));
  }
  return file;
}

void save_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  const auto bytes = encode_tensor_file(file);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

TensorFile load_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor_file(bytes, path.string());
}

}  // namespace drugprot
