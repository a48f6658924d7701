#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace vpt {

/// The six tested locations: index finger pad, back of index finger, pinky
/// finger pad, dorsal wrist, volar wrist and big toe pad.
enum class BodySite { H1, H2, H3, W1, W2, F };

/// Drives the monofilament starting size.
enum class SiteClass { hand, dorsal_foot, plantar_foot };

inline constexpr std::array<BodySite, 6> kAllSites = {BodySite::H1, BodySite::H2, BodySite::H3,
                                                      BodySite::W1, BodySite::W2, BodySite::F};

std::string_view site_code(BodySite site);
std::string_view site_description(BodySite site);
std::optional<BodySite> parse_site(std::string_view code);
SiteClass site_class(BodySite site);

}  // namespace vpt
