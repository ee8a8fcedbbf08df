#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mbi/error.hpp"
#include "mbi/table.hpp"
#include "mbi/text.hpp"

namespace mbi {

namespace {

constexpr char kMagic[4] = {'M', 'B', 'I', '1'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

std::string config_to_text(const TableConfig& c) {
  std::ostringstream os;
  os << "n_hidden=" << c.n_hidden << '\n'
     << "n_loc=" << c.n_loc << '\n'
     << "n_patch=" << c.n_patch << '\n'
     << "n_pred=" << c.n_pred << '\n'
     << "bits_hidden=" << c.bits_hidden << '\n'
     << "bits_loc=" << c.bits_loc << '\n'
     << "bits_patch=" << c.bits_patch << '\n'
     << "bits_pred=" << c.bits_pred << '\n'
     << "n_glimpses=" << c.n_glimpses << '\n'
     << "patch_size=" << c.patch_size << '\n'
     << "glimpse_scale=" << c.glimpse_scale << '\n'
     << "n_patches=" << c.n_patches << '\n'
     << "channels=" << c.channels << '\n'
     << "image_height=" << c.image_height << '\n'
     << "image_width=" << c.image_width << '\n'
     << "n_classes=" << c.n_classes << '\n'
     << "seed=" << c.seed << '\n';
  return os.str();
}

TableConfig config_from_text(const std::string& text) {
  const auto kv = parse_key_values(text);
  auto i = [&](const char* key) { return static_cast<int>(parse_int(require_value(kv, key))); };
  TableConfig c;
  c.n_hidden = i("n_hidden");
  c.n_loc = i("n_loc");
  c.n_patch = i("n_patch");
  c.n_pred = i("n_pred");
  c.bits_hidden = i("bits_hidden");
  c.bits_loc = i("bits_loc");
  c.bits_patch = i("bits_patch");
  c.bits_pred = i("bits_pred");
  c.n_glimpses = i("n_glimpses");
  c.patch_size = i("patch_size");
  c.glimpse_scale = i("glimpse_scale");
  c.n_patches = i("n_patches");
  c.channels = i("channels");
  c.image_height = i("image_height");
  c.image_width = i("image_width");
  c.n_classes = i("n_classes");
  c.seed = parse_u64(require_value(kv, "seed"));
  return c;
}

void pack_row(const TableConfig& c, const TableRow& row, std::vector<std::uint8_t>& out) {
  const auto start = out.size();
  BitWriter w(out);
  for (auto l : row.key.hidden) w.write(l, c.bits_hidden);
  w.write(static_cast<std::uint32_t>(row.key.loc.x), c.bits_loc);
  w.write(static_cast<std::uint32_t>(row.key.loc.y), c.bits_loc);
  for (auto l : row.key.patch) w.write(l, c.bits_patch);
  for (auto l : row.hidden_next) w.write(l, c.bits_hidden);
  w.write(static_cast<std::uint32_t>(row.loc_next.x), c.bits_loc);
  w.write(static_cast<std::uint32_t>(row.loc_next.y), c.bits_loc);
  w.write(row.pred, c.bits_pred);
  out.resize(start + row_size_bytes(c), 0);
}

TableRow unpack_row(const TableConfig& c, std::span<const std::uint8_t> bytes) {
  BitReader r(bytes);
  TableRow row;
  row.key.hidden.resize(c.n_hidden);
  for (auto& l : row.key.hidden) l = static_cast<std::uint8_t>(r.read(c.bits_hidden));
  row.key.loc.x = static_cast<int>(r.read(c.bits_loc));
  row.key.loc.y = static_cast<int>(r.read(c.bits_loc));
  row.key.patch.resize(c.n_patch);
  for (auto& l : row.key.patch) l = static_cast<std::uint8_t>(r.read(c.bits_patch));
  row.hidden_next.resize(c.n_hidden);
  for (auto& l : row.hidden_next) l = static_cast<std::uint8_t>(r.read(c.bits_hidden));
  row.loc_next.x = static_cast<int>(r.read(c.bits_loc));
  row.loc_next.y = static_cast<int>(r.read(c.bits_loc));
  row.pred = static_cast<std::uint8_t>(r.read(c.bits_pred));
  return row;
}

std::vector<std::uint8_t> serialize(const LookupTable& table) {
  std::string text = config_to_text(table.config());
  text += "rows=" + std::to_string(table.size()) + '\n';

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u16(out, kTableFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + table.size() * row_size_bytes(table.config()));
  for (std::size_t i = 0; i < table.size(); ++i) pack_row(table.config(), table.row(i), out);
  return out;
}

LookupTable deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw_error(Errc::truncated, "file shorter than magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw_error(Errc::bad_magic, "not an MBI table file");
  if (bytes.size() < 10) throw_error(Errc::truncated, "header ends early");
  const auto version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kTableFormatVersion)
    throw_error(Errc::version_mismatch, "table version " + std::to_string(version) + ", expected " +
                                            std::to_string(kTableFormatVersion));
  const auto text_len = get_u32(bytes.subspan(6, 4));
  if (bytes.size() < 10 + static_cast<std::size_t>(text_len)) throw_error(Errc::truncated, "config block ends early");
  const std::string text(reinterpret_cast<const char*>(bytes.data() + 10), text_len);

  TableConfig config;
  std::size_t rows = 0;
  try {
    config = config_from_text(text);
    rows = parse_u64(require_value(parse_key_values(text), "rows"));
    config.validate();
  } catch (const Error& e) {
    throw_error(Errc::size_mismatch, std::string("invalid table config: ") + e.what());
  }

  const auto payload = bytes.subspan(10 + text_len);
  const auto row_bytes = row_size_bytes(config);
  const auto expected = rows * row_bytes;
  if (payload.size() < expected)
    throw_error(Errc::truncated, "payload has " + std::to_string(payload.size()) + " bytes, expected " +
                                     std::to_string(expected));
  if (payload.size() > expected)
    throw_error(Errc::size_mismatch, "payload has " + std::to_string(payload.size()) + " bytes but config declares " +
                                         std::to_string(rows) + " rows of " + std::to_string(row_bytes) + " bytes");

  LookupTable table(config);
  table.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    try {
      table.add(unpack_row(config, payload.subspan(i * row_bytes, row_bytes)));
    } catch (const Error& e) {
      throw_error(Errc::size_mismatch, "row " + std::to_string(i) + " does not conform to config: " + e.what());
    }
  }
  return table;
}

void save(const LookupTable& table, const std::filesystem::path& path) {
  const auto bytes = serialize(table);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(Errc::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_error(Errc::io, "write failed for " + path.string());
}

LookupTable load_table(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace mbi
