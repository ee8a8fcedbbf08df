#include <bit>
#include <cstring>
#include <fstream>

#include "mbi/cluster_tree.hpp"
#include "mbi/error.hpp"
#include "mbi/text.hpp"

namespace mbi {

namespace {

constexpr char kMagic[4] = {'M', 'B', 'T', '1'};
constexpr std::uint16_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  void u(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u(std::bit_cast<std::uint64_t>(v), 8); }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t u(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > in_.size()) throw_error(Errc::truncated, "cluster tree file ends early");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  double f64() { return std::bit_cast<double>(u(8)); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> ClusterTree::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  Writer w(out);
  w.u(kVersion, 2);
  w.u(row_count_, 8);
  w.u(static_cast<std::uint32_t>(dims_), 4);
  w.u(static_cast<std::uint32_t>(n_hidden_), 4);
  w.u(static_cast<std::uint32_t>(options_.branching), 4);
  w.u(static_cast<std::uint32_t>(options_.leaf_capacity), 4);
  w.u(static_cast<std::uint32_t>(options_.max_iterations), 4);
  w.u(options_.seed, 8);
  w.f64(options_.weights.patch);
  w.f64(options_.weights.hidden);
  w.f64(options_.weights.location);
  w.u(nodes_.size(), 4);
  for (const auto& n : nodes_) {
    w.u(n.stalled ? 1 : 0, 1);
    w.u(n.children.size(), 4);
    for (auto c : n.children) w.u(c, 4);
    w.u(n.rows.size(), 4);
    for (auto r : n.rows) w.u(r, 4);
    for (auto v : n.centroid) w.f64(v);
  }
  return out;
}

ClusterTree ClusterTree::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw_error(Errc::truncated, "file shorter than magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw_error(Errc::bad_magic, "not an MBI cluster tree file");
  Reader r(bytes.subspan(4));
  const auto version = static_cast<std::uint16_t>(r.u(2));
  if (version != kVersion)
    throw_error(Errc::version_mismatch,
                "cluster tree version " + std::to_string(version) + ", expected " + std::to_string(kVersion));

  ClusterTree t;
  t.row_count_ = r.u(8);
  t.dims_ = static_cast<int>(r.u(4));
  t.n_hidden_ = static_cast<int>(r.u(4));
  t.options_.branching = static_cast<int>(r.u(4));
  t.options_.leaf_capacity = static_cast<int>(r.u(4));
  t.options_.max_iterations = static_cast<int>(r.u(4));
  t.options_.seed = r.u(8);
  t.options_.weights.patch = r.f64();
  t.options_.weights.hidden = r.f64();
  t.options_.weights.location = r.f64();
  if (t.n_hidden_ + 2 > t.dims_) throw_error(Errc::size_mismatch, "cluster tree dimensions are inconsistent");

  const auto count = r.u(4);
  // every node needs at least 9 header bytes plus its centroid
  if (count == 0 || count > r.remaining() / (9 + 8 * static_cast<std::size_t>(t.dims_)))
    throw_error(Errc::size_mismatch, "implausible node count " + std::to_string(count));
  t.nodes_.resize(count);
  for (std::size_t index = 0; index < t.nodes_.size(); ++index) {
    auto& n = t.nodes_[index];
    n.stalled = r.u(1) != 0;
    const auto nc = r.u(4);
    if (nc > count) throw_error(Errc::size_mismatch, "node child count exceeds node total");
    for (std::uint64_t i = 0; i < nc; ++i) {
      const auto c = r.u(4);
      // pre-order: children always follow their parent, so descent terminates
      if (c >= count || c <= index) throw_error(Errc::size_mismatch, "child index out of range");
      n.children.push_back(static_cast<std::uint32_t>(c));
    }
    const auto nr = r.u(4);
    if (nr > t.row_count_) throw_error(Errc::size_mismatch, "leaf holds more rows than the table");
    n.rows.reserve(nr);
    for (std::uint64_t i = 0; i < nr; ++i) n.rows.push_back(static_cast<std::uint32_t>(r.u(4)));
    n.centroid.resize(static_cast<std::size_t>(t.dims_));
    for (auto& v : n.centroid) v = r.f64();
  }
  if (r.remaining() != 0) throw_error(Errc::size_mismatch, "trailing bytes after cluster tree");
  try {
    t.check_partition();
  } catch (const Error& e) {
    throw_error(Errc::size_mismatch, std::string("cluster tree is not a partition: ") + e.what());
  }
  return t;
}

void ClusterTree::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(Errc::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_error(Errc::io, "write failed for " + path.string());
}

ClusterTree ClusterTree::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace mbi
