#include "core/tensor.hpp"

#include <fstream>

#include "core/binio.hpp"
#include "core/error.hpp"

namespace omniact {

namespace {
constexpr char kMagic[4] = {'O', 'T', 'S', 'R'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kMaxDims = 8;
constexpr size_t kMaxElems = size_t{1} << 31;
}  // namespace

Tensor::Tensor(std::vector<uint32_t> d) : dims(std::move(d)) {
  size_t n = 1;
  for (uint32_t x : dims) {
    if (x == 0) throw_invalid("tensor dimensions must be positive");
    n *= x;
  }
  if (dims.empty() || n > kMaxElems) throw_invalid("unreasonable tensor shape");
  values.assign(n, 0.0);
}

Tensor read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open tensor file: " + path);
  binio::expect_magic(in, kMagic, path);
  const uint32_t version = binio::get_u32(in, path + " version");
  if (version != kVersion) {
    throw_io(path + ": unsupported tensor version " + std::to_string(version));
  }
  const uint32_t ndim = binio::get_u32(in, path + " ndim");
  if (ndim == 0 || ndim > kMaxDims) {
    throw_io(path + ": unreasonable tensor rank " + std::to_string(ndim));
  }
  std::vector<uint32_t> dims(ndim);
  size_t n = 1;
  for (uint32_t i = 0; i < ndim; ++i) {
    dims[i] = binio::get_u32(in, path + " dims");
    if (dims[i] == 0 || n > kMaxElems / std::max<uint32_t>(dims[i], 1)) {
      throw_io(path + ": unreasonable tensor shape");
    }
    n *= dims[i];
  }
  Tensor t;
  t.dims = std::move(dims);
  t.values.resize(n);
  // Bulk-read the f32 payload, then widen.
  std::vector<unsigned char> raw(n * 4);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw_io(path + ": truncated tensor payload");
  }
  for (size_t i = 0; i < n; ++i) {
    const uint32_t bits = static_cast<uint32_t>(raw[4 * i]) |
                          (static_cast<uint32_t>(raw[4 * i + 1]) << 8) |
                          (static_cast<uint32_t>(raw[4 * i + 2]) << 16) |
                          (static_cast<uint32_t>(raw[4 * i + 3]) << 24);
    t.values[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return t;
}

void write_tensor(const Tensor& t, const std::string& path) {
  if (t.dims.empty()) throw_invalid("cannot write empty tensor");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open tensor file for writing: " + path);
  binio::put_magic(out, kMagic);
  binio::put_u32(out, kVersion);
  binio::put_u32(out, static_cast<uint32_t>(t.dims.size()));
  for (uint32_t d : t.dims) binio::put_u32(out, d);
  std::vector<unsigned char> raw(t.values.size() * 4);
  for (size_t i = 0; i < t.values.size(); ++i) {
    const uint32_t bits =
        std::bit_cast<uint32_t>(static_cast<float>(t.values[i]));
    raw[4 * i] = static_cast<unsigned char>(bits & 0xff);
    raw[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xff);
    raw[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xff);
    raw[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw_io("failed writing tensor: " + path);
}

}  // namespace omniact
