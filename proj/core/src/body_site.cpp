#include "vpt/body_site.hpp"

namespace vpt {

std::string_view site_code(BodySite site) {
  switch (site) {
    case BodySite::H1: return "H1";
    case BodySite::H2: return "H2";
    case BodySite::H3: return "H3";
    case BodySite::W1: return "W1";
    case BodySite::W2: return "W2";
    case BodySite::F: return "F";
  }
  return "?";
}

std::string_view site_description(BodySite site) {
  switch (site) {
    case BodySite::H1: return "index finger pad";
    case BodySite::H2: return "back of index finger";
    case BodySite::H3: return "pinky finger pad";
    case BodySite::W1: return "dorsal wrist";
    case BodySite::W2: return "volar wrist";
    case BodySite::F: return "big toe pad";
  }
  return "?";
}

std::optional<BodySite> parse_site(std::string_view code) {
  for (BodySite s : kAllSites) {
    if (site_code(s) == code) return s;
  }
  return std::nullopt;
}

SiteClass site_class(BodySite site) {
  // Wrists start like the hand; the toe pad is plantar.
  return site == BodySite::F ? SiteClass::plantar_foot : SiteClass::hand;
}

}  // namespace vpt
