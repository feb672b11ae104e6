#include "hldet/nn/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "hldet/common.hpp"

namespace hldet::nn {

namespace {

constexpr char kMagic[4] = {'H', 'L', 'D', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("truncated parameter archive");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void save_parameters(const ParameterSet& params, const std::filesystem::path& path) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  auto all = params.all();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(all.size()));
  for (const auto* p : all) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    put<std::int64_t>(out, p->value.rows());
    put<std::int64_t>(out, p->value.cols());
    out.append(reinterpret_cast<const char*>(p->value.data()),
               static_cast<std::size_t>(p->value.size()) * sizeof(float));
  }
  write_file(path, out);
}

void load_parameters(ParameterSet& params, const std::filesystem::path& path, bool allow_missing) {
  std::string in = read_file(path);
  if (in.size() < 8 || std::memcmp(in.data(), kMagic, 4) != 0)
    throw DataError("not a parameter archive: " + path.string());
  std::size_t pos = 4;
  if (take<std::uint32_t>(in, pos) != kVersion) throw DataError("unsupported archive version");
  auto n = take<std::uint32_t>(in, pos);
  std::map<std::string, bool> seen;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto len = take<std::uint32_t>(in, pos);
    if (pos + len > in.size()) throw DataError("truncated parameter archive");
    std::string name = in.substr(pos, len);
    pos += len;
    auto rows = take<std::int64_t>(in, pos);
    auto cols = take<std::int64_t>(in, pos);
    auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(float);
    if (pos + bytes > in.size()) throw DataError("truncated parameter archive");
    if (auto* p = params.find(name)) {
      if (p->value.rows() != rows || p->value.cols() != cols)
        throw DataError("shape mismatch for parameter " + name);
      std::memcpy(p->value.data(), in.data() + pos, bytes);
      seen[name] = true;
    }
    pos += bytes;
  }
  if (!allow_missing)
    for (const auto* p : std::as_const(params).all())
      if (!seen.count(p->name)) throw DataError("archive lacks parameter " + p->name);
}

std::size_t copy_matching(const ParameterSet& src, ParameterSet& dst) {
  std::size_t n = 0;
  for (const auto* s : src.all()) {
    auto* d = dst.find(s->name);
    if (d && d->value.rows() == s->value.rows() && d->value.cols() == s->value.cols()) {
      d->value = s->value;
      ++n;
    }
  }
  return n;
}

}  // namespace hldet::nn
