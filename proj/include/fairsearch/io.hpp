#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace fairsearch {

/// Writes to a sibling temp file and renames it over `path`.
void writeFileAtomic(const std::filesystem::path& path, std::string_view content);

std::string readFile(const std::filesystem::path& path);

}  // namespace fairsearch
