#include "mtaa/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace mtaa {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'A', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ParseError("checkpoint: truncated file", 0);
  return v;
}

void write_vec(std::ostream& os, const Vec& v) {
  write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

Vec read_vec(std::istream& is) {
  const auto n = read_pod<std::uint64_t>(is);
  Vec v(static_cast<Eigen::Index>(n));
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw ParseError("checkpoint: truncated parameter payload", 0);
  return v;
}

void write_dims(std::ostream& os, const std::vector<int>& dims) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) write_pod<std::int32_t>(os, d);
}

std::vector<int> read_dims(std::istream& is) {
  const auto n = read_pod<std::uint32_t>(is);
  std::vector<int> dims(n);
  for (auto& d : dims) d = read_pod<std::int32_t>(is);
  return dims;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ckpt.params.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());

  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(os, kVersion);

  const Architecture& a = ckpt.params.arch;
  write_pod<std::int32_t>(os, a.input_dim);
  write_dims(os, a.encoder_hidden);
  write_pod<std::int32_t>(os, a.latent_dim);
  write_dims(os, a.head_hidden);
  write_pod<std::int32_t>(os, a.num_tasks);
  write_pod<std::int32_t>(os, a.num_levels);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(a.activation));

  write_vec(os, ckpt.params.shared);
  for (const Vec& h : ckpt.params.heads) write_vec(os, h);

  write_pod<std::uint8_t>(os, ckpt.trainer.has_value() ? 1 : 0);
  if (ckpt.trainer) {
    write_pod<std::int32_t>(os, ckpt.trainer->epoch);
    write_pod<double>(os, ckpt.trainer->best_val);
    write_vec(os, ckpt.trainer->vel_shared);
    for (const Vec& h : ckpt.trainer->vel_heads) write_vec(os, h);
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("checkpoint: bad magic in " + path.string(), 0);
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), 0);
  }

  Checkpoint ckpt;
  Architecture& a = ckpt.params.arch;
  a.input_dim = read_pod<std::int32_t>(is);
  a.encoder_hidden = read_dims(is);
  a.latent_dim = read_pod<std::int32_t>(is);
  a.head_hidden = read_dims(is);
  a.num_tasks = read_pod<std::int32_t>(is);
  a.num_levels = read_pod<std::int32_t>(is);
  a.activation = static_cast<Activation>(read_pod<std::uint32_t>(is));

  ckpt.params.shared = read_vec(is);
  ckpt.params.heads.clear();
  for (int t = 0; t < a.num_tasks; ++t) ckpt.params.heads.push_back(read_vec(is));

  if (read_pod<std::uint8_t>(is) != 0) {
    TrainerState st;
    st.epoch = read_pod<std::int32_t>(is);
    st.best_val = read_pod<double>(is);
    st.vel_shared = read_vec(is);
    for (int t = 0; t < a.num_tasks; ++t) st.vel_heads.push_back(read_vec(is));
    ckpt.trainer = std::move(st);
  }
  ckpt.params.validate();
  return ckpt;
}

}  // namespace mtaa
