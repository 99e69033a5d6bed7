#include <fstream>
#include <set>
#include <sstream>

#include "jif/csv.hpp"
#include "jif/data.hpp"

namespace jif {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<Index> Dataset::class_counts() const {
  std::vector<Index> counts(static_cast<std::size_t>(num_classes()), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Dataset Dataset::subset(std::span<const int> indices) const {
  Dataset out;
  out.channels = channels;
  out.height = height;
  out.width = width;
  out.schema = schema;
  const auto n = static_cast<Index>(indices.size());
  out.images.resize(n, images.cols());
  out.metadata.resize(n, metadata.cols());
  for (Index i = 0; i < n; ++i) {
    const int src = indices[static_cast<std::size_t>(i)];
    out.images.row(i) = images.row(src);
    out.metadata.row(i) = metadata.row(src);
    out.labels.push_back(labels[static_cast<std::size_t>(src)]);
    if (!ids.empty()) out.ids.push_back(ids[static_cast<std::size_t>(src)]);
    if (!records.empty()) out.records.push_back(records[static_cast<std::size_t>(src)]);
  }
  return out;
}

Image Dataset::image(Index i) const {
  Image img(channels, height, width);
  img.pixels = images.row(i).transpose().array();
  return img;
}

MetadataTable parse_metadata_csv(std::string_view csv_text, const MetadataSchema& schema) {
  const CsvTable csv = parse_csv(csv_text);
  const int id_col = csv.column("id");
  const int label_col = csv.column("diagnostic");
  if (id_col < 0) throw ConfigError("metadata CSV has no 'id' column");
  if (label_col < 0) throw ConfigError("metadata CSV has no 'diagnostic' column");
  std::vector<int> columns;
  for (const auto& col : schema.columns) {
    const int idx = csv.column(col.name);
    if (idx < 0) throw ConfigError("metadata CSV is missing schema column '" + col.name + "'");
    columns.push_back(idx);
  }
  MetadataTable table;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string& label = row[static_cast<std::size_t>(label_col)];
    const int y = schema.class_index(label);
    if (y < 0) {
      throw DataError("metadata CSV row " + std::to_string(r + 1) + " (id " +
                      row[static_cast<std::size_t>(id_col)] + "): unknown diagnostic '" + label + "'");
    }
    MetadataRecord record;
    record.reserve(columns.size());
    for (int c : columns) {
      const std::string& v = row[static_cast<std::size_t>(c)];
      record.push_back(v.empty() ? std::nullopt : std::optional<std::string>(v));
    }
    table.ids.push_back(row[static_cast<std::size_t>(id_col)]);
    table.records.push_back(std::move(record));
    table.labels.push_back(y);
  }
  return table;
}

MetadataTable load_metadata_csv(const std::filesystem::path& csv_path,
                                const std::filesystem::path& schema_path) {
  const MetadataSchema schema = schema_from_json(read_text_file(schema_path));
  return parse_metadata_csv(read_text_file(csv_path), schema);
}

Dataset load_dataset_dir(const std::filesystem::path& dir, Index height, Index width) {
  Dataset ds;
  ds.schema = schema_from_json(read_text_file(dir / "schema.json"));
  if (ds.schema.classes.size() < 2) throw ConfigError("schema.json must list at least two classes");
  MetadataTable table = parse_metadata_csv(read_text_file(dir / "meta.csv"), ds.schema);
  ds.channels = 3;
  ds.height = height;
  ds.width = width;
  const auto n = static_cast<Index>(table.ids.size());
  ds.images.resize(n, 3 * height * width);
  ds.metadata.resize(n, ds.schema.encoded_width());
  std::set<std::string> seen;
  for (Index i = 0; i < n; ++i) {
    const std::string& id = table.ids[static_cast<std::size_t>(i)];
    if (!seen.insert(id).second) throw DataError("duplicate id '" + id + "' in meta.csv");
    const Image img = load_image(dir / "images" / (id + ".ppm"), height, width);
    ds.images.row(i) = img.pixels.matrix().transpose();
    ds.metadata.row(i) = one_hot_encode(table.records[static_cast<std::size_t>(i)], ds.schema);
  }
  ds.ids = std::move(table.ids);
  ds.records = std::move(table.records);
  ds.labels = std::move(table.labels);
  return ds;
}

void write_dataset_dir(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw DataError("cannot create " + (dir / "images").string() + ": " + ec.message());
  write_text_file(dir / "schema.json", schema_to_json(dataset.schema));

  std::string csv = "id,diagnostic";
  for (const auto& col : dataset.schema.columns) csv += "," + csv_field(col.name);
  csv += "\n";
  for (Index i = 0; i < dataset.size(); ++i) {
    const auto& id = dataset.ids[static_cast<std::size_t>(i)];
    csv += csv_field(id) + "," +
           csv_field(dataset.schema.classes[static_cast<std::size_t>(dataset.labels[static_cast<std::size_t>(i)])]);
    for (const auto& v : dataset.records[static_cast<std::size_t>(i)]) csv += "," + csv_field(v.value_or(""));
    csv += "\n";
    save_image(dataset.image(i), dir / "images" / (id + ".ppm"));
  }
  write_text_file(dir / "meta.csv", csv);
}

}  // namespace jif
