#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geoxplain/pipeline.hpp"

namespace geoxplain::report {

// Grouped-bar SVGs (deletion.svg, insertion.svg) with the exact aggregate
// numbers embedded as data-value attributes, plus plot_data.json and a
// markdown gallery of top-k crops per image. Reads only persisted artifacts.
void write_reports(const std::filesystem::path& run_directory, int gallery_top_k,
                   int gallery_max_images);

std::string sweep_table_csv(const std::vector<pipeline::SweepRow>& rows);

}  // namespace geoxplain::report
