#pragma once

// Catalogs are slow to build; each test binary builds the ones it needs once.

#include <map>
#include <memory>
#include <string>

#include "rydsi/catalog.hpp"
#include "rydsi/interaction.hpp"

namespace fixtures {

inline const rydsi::Catalog& catalog(const std::string& species, const std::string& state) {
  static std::map<std::string, std::unique_ptr<rydsi::Catalog>> cache;
  auto& slot = cache[species + ":" + state];
  if (!slot) slot = std::make_unique<rydsi::Catalog>(rydsi::build_catalog(rydsi::species_lookup(species, state)));
  return *slot;
}

inline const rydsi::Catalog& phosphorus() { return catalog("P", "2p0"); }

inline const rydsi::InteractionContext& phosphorus_context() {
  static const rydsi::InteractionContext ctx = rydsi::InteractionContext::make(phosphorus());
  return ctx;
}

}  // namespace fixtures
