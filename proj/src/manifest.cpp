#include "geoxplain/manifest.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "geoxplain/errors.hpp"

namespace geoxplain::ingest {

using nlohmann::json;

const char* split_name(Split split) { return split == Split::train ? "train" : "eval"; }

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "eval") return Split::eval;
  throw Error(ErrorCode::SchemaError, "split must be 'train' or 'eval', got '" + name + "'");
}

std::vector<ImageRecord> DatasetManifest::split_records(Split split) const {
  std::vector<ImageRecord> out;
  for (const auto& record : records) {
    if (record.split == split) out.push_back(record);
  }
  return out;
}

namespace {

json parse_line(const std::string& line, const std::filesystem::path& path, int line_no) {
  json parsed = json::parse(line, nullptr, false);
  if (parsed.is_discarded())
    throw Error(ErrorCode::SchemaError,
                path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
  return parsed;
}

template <typename T>
T require_field(const json& object, const char* key, const std::filesystem::path& path,
                int line_no) {
  if (!object.contains(key))
    throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(line_no) +
                                            ": missing field '" + key + "'");
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::SchemaError, path.string() + ":" + std::to_string(line_no) +
                                            ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());

  std::string line;
  int line_no = 0;
  DatasetManifest manifest;

  // Header line.
  if (!std::getline(in, line))
    throw Error(ErrorCode::SchemaError, path.string() + ": empty manifest file (missing header)");
  ++line_no;
  json header = parse_line(line, path, line_no);
  manifest.num_classes = require_field<int>(header, "num_classes", path, line_no);
  if (manifest.num_classes <= 0)
    throw Error(ErrorCode::SchemaError, path.string() + ": num_classes must be positive");
  manifest.class_names = require_field<std::vector<std::string>>(header, "class_names", path, line_no);
  if (static_cast<int>(manifest.class_names.size()) != manifest.num_classes)
    throw Error(ErrorCode::SchemaError,
                path.string() + ": class_names has " + std::to_string(manifest.class_names.size()) +
                    " entries, expected num_classes=" + std::to_string(manifest.num_classes));

  std::unordered_set<std::string> seen_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row = parse_line(line, path, line_no);
    ImageRecord record;
    record.id = require_field<std::string>(row, "id", path, line_no);
    record.uri = require_field<std::string>(row, "uri", path, line_no);
    record.label = require_field<int>(row, "label", path, line_no);
    record.split = split_from_string(require_field<std::string>(row, "split", path, line_no));
    if (record.label < 0 || record.label >= manifest.num_classes)
      throw Error(ErrorCode::LabelOutOfRange,
                  "record '" + record.id + "': label " + std::to_string(record.label) +
                      " outside [0, " + std::to_string(manifest.num_classes) + ")");
    if (!seen_ids.insert(record.id).second)
      throw Error(ErrorCode::SchemaError, "record id '" + record.id + "' appears more than once");
    record.label_name = manifest.class_names[record.label];
    manifest.records.push_back(std::move(record));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
  json header;
  header["num_classes"] = manifest.num_classes;
  header["class_names"] = manifest.class_names;
  out << header.dump() << "\n";
  for (const auto& record : manifest.records) {
    json row;
    row["id"] = record.id;
    row["uri"] = record.uri;
    row["label"] = record.label;
    row["split"] = split_name(record.split);
    out << row.dump() << "\n";
  }
}

std::map<Split, std::vector<int>> split_class_counts(const DatasetManifest& manifest) {
  std::map<Split, std::vector<int>> counts;
  counts[Split::train] = std::vector<int>(manifest.num_classes, 0);
  counts[Split::eval] = std::vector<int>(manifest.num_classes, 0);
  for (const auto& record : manifest.records) ++counts[record.split][record.label];
  return counts;
}

}  // namespace geoxplain::ingest
