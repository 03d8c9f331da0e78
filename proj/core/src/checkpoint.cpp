#include "ael/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "ael/errors.hpp"

namespace ael {

namespace {

constexpr std::array<char, 4> kMagic = {'A', 'E', 'L', '1'};
constexpr std::uint64_t kFlagGating = 1;
// Refuse to allocate absurd shapes read from a corrupt header.
constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 32;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw DataError("checkpoint: truncated header");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void put_block(std::ostream& out, std::span<const double> block) {
  for (double v : block) put_le(out, std::bit_cast<std::uint64_t>(v));
}

void get_block(std::istream& in, std::span<double> block) {
  std::vector<unsigned char> bytes(block.size() * 8);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw DataError("checkpoint: truncated parameter data");
  }
  for (std::size_t i = 0; i < block.size(); ++i) {
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    block[i] = std::bit_cast<double>(bits);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const AelModel& model, const GatingParams* gating) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, model.num_users());
  put_le<std::uint64_t>(out, model.num_items());
  put_le<std::uint64_t>(out, model.dims().large);
  put_le<std::uint64_t>(out, model.dims().medium);
  put_le<std::uint64_t>(out, model.dims().small);
  put_le<std::uint64_t>(out, gating ? kFlagGating : 0);
  put_le<std::uint64_t>(out, gating ? gating->num_experts() : 0);
  put_le<std::uint64_t>(out, gating ? gating->k : 0);
  for (auto b : model.blocks()) put_block(out, b);
  if (gating) {
    if (gating->input_dim() != model.num_items()) throw std::invalid_argument("save_checkpoint: gate/model mismatch");
    for (auto b : gating->blocks()) put_block(out, b);
  }
  if (!out) throw DataError("error while writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError("checkpoint '" + path.string() + "': bad magic");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  const auto users = get_le<std::uint64_t>(in);
  const auto items = get_le<std::uint64_t>(in);
  HiddenDims dims;
  dims.large = get_le<std::uint64_t>(in);
  dims.medium = get_le<std::uint64_t>(in);
  dims.small = get_le<std::uint64_t>(in);
  const auto flags = get_le<std::uint64_t>(in);
  const auto experts = get_le<std::uint64_t>(in);
  const auto k = get_le<std::uint64_t>(in);

  for (auto v : {users, items, dims.large, dims.medium, dims.small}) {
    if (v == 0 || v > kMaxDim) throw DataError("checkpoint: implausible shape in header");
  }
  if (flags & ~kFlagGating) throw DataError("checkpoint: unknown flags");
  if ((flags & kFlagGating) && (experts != kNumExperts || k < 1 || k > experts)) {
    throw DataError("checkpoint: bad gate shape");
  }

  const auto expected = count_parameters(users, items, dims, false) +
                        ((flags & kFlagGating) ? 2 * items * experts : 0);
  const auto header_bytes = in.tellg();
  in.seekg(0, std::ios::end);
  const auto total_bytes = static_cast<std::uint64_t>(in.tellg());
  in.seekg(header_bytes);
  if (total_bytes != static_cast<std::uint64_t>(header_bytes) + expected * 8) {
    throw DataError("checkpoint: file size does not match header shape");
  }

  Checkpoint cp{AelModel(users, items, dims), std::nullopt};
  for (auto b : cp.model.blocks()) get_block(in, b);
  if (flags & kFlagGating) {
    cp.gating = GatingParams(items, experts, k);
    for (auto b : cp.gating->blocks()) get_block(in, b);
  }
  return cp;
}

}  // namespace ael
