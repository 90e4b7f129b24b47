#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fallacy::resources {

/// Files under data/, compiled in. Names are paths relative to data/,
/// e.g. "templates/zero_shot.tpl".
std::optional<std::string_view> find(std::string_view name);
std::vector<std::string_view> names();

/// Like find(), but throws std::out_of_range for unknown names.
inline std::string_view get(std::string_view name) {
    auto r = find(name);
    if (!r) throw std::out_of_range("no embedded resource " + std::string(name));
    return *r;
}

}  // namespace fallacy::resources
