#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace geoxplain::ingest {

enum class Split { train, eval };

const char* split_name(Split split);
Split split_from_string(const std::string& name);  // SchemaError on anything else

struct ImageRecord {
  std::string id;
  std::string uri;  // file path or URL
  int label = 0;
  std::string label_name;  // resolved from the manifest header
  Split split = Split::train;

  bool operator==(const ImageRecord&) const = default;
};

struct DatasetManifest {
  int num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<ImageRecord> records;

  std::vector<ImageRecord> split_records(Split split) const;

  bool operator==(const DatasetManifest&) const = default;
};

// Manifest file format: one JSON header line {"num_classes": N, "class_names": [...]}
// followed by one JSON object per record with keys id, uri, label, split.
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Per-split per-class record counts, for run logs. Reported, never enforced.
std::map<Split, std::vector<int>> split_class_counts(const DatasetManifest& manifest);

}  // namespace geoxplain::ingest
