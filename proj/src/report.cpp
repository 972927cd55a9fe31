#include "geoxplain/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "geoxplain/errors.hpp"

namespace geoxplain::report {

using nlohmann::json;

namespace {

struct PairSummary {
  std::string pair_name;
  json summary;
};

// json round-trips doubles exactly, so data-value attributes carry the
// aggregate numbers bit-for-bit.
std::string number(double v) { return json(v).dump(); }

void write_grouped_bars(const std::filesystem::path& path, const std::string& title,
                        const std::vector<PairSummary>& pairs, const char* field) {
  const int bar_width = 42;
  const int group_gap = 36;
  const int bar_gap = 8;
  const int left = 70, top = 48, plot_height = 240;
  const int group_width = 2 * bar_width + bar_gap;
  const int width =
      left + static_cast<int>(pairs.size()) * (group_width + group_gap) + 40;
  const int height = top + plot_height + 72;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  svg << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";

  // Axis with a [0,1] scale.
  svg << "<line x1=\"" << left - 8 << "\" y1=\"" << top << "\" x2=\"" << left - 8 << "\" y2=\""
      << top + plot_height << "\" stroke=\"#444\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double value = tick / 4.0;
    const int y = top + plot_height - static_cast<int>(value * plot_height);
    svg << "<text x=\"" << left - 14 << "\" y=\"" << y + 4
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << value
        << "</text>\n";
    svg << "<line x1=\"" << left - 12 << "\" y1=\"" << y << "\" x2=\"" << left - 8 << "\" y2=\""
        << y << "\" stroke=\"#444\"/>\n";
  }

  int x = left;
  for (const auto& entry : pairs) {
    const bool has_conditions = entry.summary.contains("guided");
    const double guided = has_conditions ? entry.summary["guided"][field].get<double>() : 0.0;
    const double random = has_conditions && entry.summary.contains("random")
                              ? entry.summary["random"][field].get<double>()
                              : 0.0;
    auto bar = [&](double value, int bx, const char* color, const char* condition) {
      const double clamped = std::clamp(value, 0.0, 1.0);
      const int bh = static_cast<int>(clamped * plot_height);
      svg << "<rect x=\"" << bx << "\" y=\"" << top + plot_height - bh << "\" width=\""
          << bar_width << "\" height=\"" << bh << "\" fill=\"" << color << "\" data-condition=\""
          << condition << "\" data-pair=\"" << entry.pair_name << "\" data-value=\""
          << number(value) << "\"/>\n";
      svg << "<text x=\"" << bx + bar_width / 2 << "\" y=\"" << top + plot_height - bh - 4
          << "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\">"
          << number(value).substr(0, 6) << "</text>\n";
    };
    bar(guided, x, "#3465a4", "guided");
    bar(random, x + bar_width + bar_gap, "#aaaaaa", "random");
    svg << "<text x=\"" << x + group_width / 2 << "\" y=\"" << top + plot_height + 18
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">"
        << entry.pair_name << "</text>\n";
    x += group_width + group_gap;
  }
  svg << "<rect x=\"" << left << "\" y=\"" << height - 28
      << "\" width=\"12\" height=\"12\" fill=\"#3465a4\"/>"
      << "<text x=\"" << left + 18 << "\" y=\"" << height - 18
      << "\" font-family=\"sans-serif\" font-size=\"11\">guided</text>\n";
  svg << "<rect x=\"" << left + 90 << "\" y=\"" << height - 28
      << "\" width=\"12\" height=\"12\" fill=\"#aaaaaa\"/>"
      << "<text x=\"" << left + 108 << "\" y=\"" << height - 18
      << "\" font-family=\"sans-serif\" font-size=\"11\">random</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
  out << svg.str();
}

}  // namespace

void write_reports(const std::filesystem::path& run_directory, int gallery_top_k,
                   int gallery_max_images) {
  std::vector<PairSummary> pairs;
  const auto pairs_root = run_directory / "pairs";
  std::vector<std::filesystem::path> pair_dirs;
  for (const auto& entry : std::filesystem::directory_iterator(pairs_root)) {
    if (entry.is_directory()) pair_dirs.push_back(entry.path());
  }
  std::sort(pair_dirs.begin(), pair_dirs.end());
  for (const auto& dir : pair_dirs) {
    const auto summary_path = dir / "summary.json";
    if (!std::filesystem::exists(summary_path)) continue;
    std::ifstream in(summary_path);
    json summary = json::parse(in, nullptr, false);
    if (summary.is_discarded()) continue;
    pairs.push_back({dir.filename().string(), std::move(summary)});
  }
  if (pairs.empty())
    throw Error(ErrorCode::MissingResults,
                "no summary.json found under '" + pairs_root.string() + "'; run evaluate first");

  const auto report_dir = run_directory / "report";
  std::filesystem::create_directories(report_dir);

  write_grouped_bars(report_dir / "deletion.svg",
                     "Deletion accuracy after occluding crops (lower = more faithful)", pairs,
                     "accuracy_deletion");
  write_grouped_bars(report_dir / "insertion.svg",
                     "Insertion accuracy from crops alone (higher = more faithful)", pairs,
                     "accuracy_insertion");

  json plot_data = json::array();
  for (const auto& entry : pairs) {
    json row{{"pair", entry.pair_name}};
    if (entry.summary.contains("guided")) row["guided"] = entry.summary["guided"];
    if (entry.summary.contains("random")) row["random"] = entry.summary["random"];
    plot_data.push_back(std::move(row));
  }
  {
    std::ofstream out(report_dir / "plot_data.json");
    out << plot_data.dump(2) << "\n";
  }

  // Markdown gallery: the top-k crops of the first images of every pair,
  // with the full factor breakdown.
  std::ofstream gallery(report_dir / "gallery.md");
  gallery << "# Extracted object-like elements\n";
  for (const auto& entry : pairs) {
    gallery << "\n## " << entry.pair_name << "\n";
    const auto crops_file = pairs_root / entry.pair_name / "crops.jsonl";
    if (!std::filesystem::exists(crops_file)) continue;
    std::ifstream crops_in(crops_file);
    std::string line;
    int images_shown = 0;
    while (images_shown < gallery_max_images && std::getline(crops_in, line)) {
      if (line.empty()) continue;
      json record = json::parse(line, nullptr, false);
      if (record.is_discarded()) continue;
      const auto& elements = record.at("elements");
      gallery << "\n### " << record.at("image_id").get<std::string>() << "\n\n";
      if (elements.empty()) {
        gallery << "_no elements above s_min_\n";
        ++images_shown;
        continue;
      }
      gallery << "| rank | box (r0,c0,r1,c1) | overlap | mean | central | score | crop |\n";
      gallery << "|---|---|---|---|---|---|---|\n";
      int shown = 0;
      for (const auto& element : elements) {
        if (shown >= gallery_top_k) break;
        const int rank = element.at("rank").get<int>();
        std::ostringstream image_cell;
        const std::string image_rel = entry.pair_name + "/crop_images/";
        // crop image files are optional; reference them when exported
        image_cell << "![](../pairs/" << entry.pair_name << "/crop_images/"
                   << record.at("image_id").get<std::string>() << "_" << rank << ".png)";
        gallery << "| " << rank << " | (" << element.at("row0") << "," << element.at("col0")
                << "," << element.at("row1") << "," << element.at("col1") << ") | "
                << number(element.at("overlap").get<double>()) << " | "
                << number(element.at("mean_importance").get<double>()) << " | "
                << number(element.at("central_importance").get<double>()) << " | "
                << number(element.at("score").get<double>()) << " | " << image_cell.str()
                << " |\n";
        ++shown;
      }
      ++images_shown;
    }
  }
}

std::string sweep_table_csv(const std::vector<pipeline::SweepRow>& rows) {
  std::ostringstream csv;
  // Union of parameter names, in sorted order, for a stable header.
  std::vector<std::string> param_names;
  for (const auto& row : rows) {
    for (const auto& [name, value] : row.params) {
      if (std::find(param_names.begin(), param_names.end(), name) == param_names.end())
        param_names.push_back(name);
    }
  }
  std::sort(param_names.begin(), param_names.end());
  for (const auto& name : param_names) csv << name << ",";
  csv << "method,backend,coverage,deletion_drop,insertion_accuracy\n";
  for (const auto& row : rows) {
    for (const auto& name : param_names) {
      auto it = row.params.find(name);
      if (it != row.params.end()) csv << number(it->second);
      csv << ",";
    }
    csv << row.method << "," << row.backend << "," << number(row.coverage) << ","
        << number(row.deletion_drop) << "," << number(row.insertion_accuracy) << "\n";
  }
  return csv.str();
}

}  // namespace geoxplain::report
