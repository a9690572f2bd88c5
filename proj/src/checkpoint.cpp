#include <string>

#include "binary_io.hpp"
#include "hsva/model.hpp"

namespace hsva {
namespace {

constexpr char kMagic[8] = {'H', 'S', 'V', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const HsvaModel<float>& model, const std::filesystem::path& path) {
  nlohmann::ordered_json manifest;
  manifest["architecture"] = architecture_to_json(model.architecture());
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto& p : model.params()) {
    params.push_back({{"name", p.name}, {"group", p.group}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  manifest["parameters"] = std::move(params);
  const std::string text = manifest.dump();

  std::string buf(kMagic, sizeof(kMagic));
  binary::append<std::uint32_t>(buf, kCheckpointVersion);
  binary::append<std::uint64_t>(buf, text.size());
  buf += text;
  for (const auto& p : model.params()) {
    binary::append_array(buf, p.value.data(), static_cast<std::size_t>(p.value.size()));
  }
  binary::write_file(path, buf);
}

HsvaModel<float> load_checkpoint(const std::filesystem::path& path) {
  const std::string what = "checkpoint '" + path.string() + "'";
  const std::string buf = binary::read_file(path);
  if (buf.size() < sizeof(kMagic) || buf.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0) {
    throw DataError(what + ": bad magic");
  }
  std::size_t offset = sizeof(kMagic);
  const auto version = binary::read<std::uint32_t>(buf, offset, what);
  if (version != kCheckpointVersion) throw DataError(what + ": unsupported version " + std::to_string(version));
  const auto length = binary::read<std::uint64_t>(buf, offset, what);
  if (length > buf.size() - offset) throw DataError(what + ": manifest truncated");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(buf.substr(offset, length));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(what + ": manifest is not valid JSON: " + e.what());
  }
  offset += length;

  const Architecture arch = architecture_from_json(manifest.at("architecture"));
  ParamStore<float> store;
  try {
    for (const auto& entry : manifest.at("parameters")) {
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      const auto name = entry.at("name").get<std::string>();
      if (rows <= 0 || cols <= 0) throw DataError(what + ": parameter '" + name + "' has empty shape");
      Matrix m(rows, cols);
      binary::read_array(buf, offset, m.data(), static_cast<std::size_t>(m.size()), what + " parameter '" + name + "'");
      require_finite(m, "checkpoint parameter '" + name + "'");
      store.add(name, entry.at("group").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(what + ": malformed manifest: " + e.what());
  }
  if (offset != buf.size()) throw DataError(what + ": " + std::to_string(buf.size() - offset) + " trailing bytes");
  return HsvaModel<float>(arch, std::move(store));
}

}  // namespace hsva
