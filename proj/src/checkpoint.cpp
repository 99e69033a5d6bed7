#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "jif/training.hpp"
#include "json.hpp"

namespace jif {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written as little-endian float64");

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& bin_path,
                     const std::filesystem::path& manifest_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot write " + bin_path.string());
  nlohmann::json manifest;
  manifest["format"] = "float64-le";
  manifest["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : ckpt.arrays) {
    const auto bytes = static_cast<std::uint64_t>(m.size()) * sizeof(double);
    bin.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(bytes));
    manifest["arrays"].push_back(
        {{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  if (!bin) throw DataError("write failed for " + bin_path.string());
  manifest["total_bytes"] = offset;
  std::ofstream man(manifest_path, std::ios::binary);
  if (!man) throw DataError("cannot write " + manifest_path.string());
  man << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& bin_path,
                           const std::filesystem::path& manifest_path) {
  std::ifstream man(manifest_path, std::ios::binary);
  if (!man) throw DataError("cannot open " + manifest_path.string());
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot open " + bin_path.string());
  const std::vector<char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  Checkpoint ckpt;
  try {
    const auto manifest = nlohmann::json::parse(man);
    for (const auto& entry : manifest.at("arrays")) {
      const auto rows = entry.at("shape").at(0).get<Index>();
      const auto cols = entry.at("shape").at(1).get<Index>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto bytes = static_cast<std::uint64_t>(rows * cols) * sizeof(double);
      if (offset + bytes > blob.size()) {
        throw FormatError("checkpoint array '" + entry.at("name").get<std::string>() +
                          "' extends past the end of " + bin_path.string());
      }
      Matrix m(rows, cols);
      std::memcpy(m.data(), blob.data() + offset, bytes);
      ckpt.arrays.emplace_back(entry.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint manifest " + manifest_path.string() + ": " + e.what());
  }
  return ckpt;
}

}  // namespace jif
