#pragma once

#include <stdexcept>
#include <string>

namespace rydsi {

/// Base of every error raised by the library. `category()` maps onto the
/// CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Category { Config, Solver, Integration, Io };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

#define RYDSI_DEFINE_ERROR(Name, Cat)                                        \
  class Name : public Error {                                                \
   public:                                                                   \
    explicit Name(const std::string& what)                                   \
        : Error(Category::Cat, std::string(#Name ": ") + what) {}            \
  };

RYDSI_DEFINE_ERROR(ConfigError, Config)
RYDSI_DEFINE_ERROR(UnknownSpecies, Config)
RYDSI_DEFINE_ERROR(DimensionMismatch, Config)
RYDSI_DEFINE_ERROR(NonPositiveRabi, Config)
RYDSI_DEFINE_ERROR(GuardViolation, Config)
RYDSI_DEFINE_ERROR(ZeroSeparation, Config)
RYDSI_DEFINE_ERROR(InvalidState, Integration)
RYDSI_DEFINE_ERROR(IntegrationFailure, Integration)
RYDSI_DEFINE_ERROR(NoConvergence, Integration)
RYDSI_DEFINE_ERROR(MeshTooCoarse, Solver)
RYDSI_DEFINE_ERROR(EigensolverFailure, Solver)
RYDSI_DEFINE_ERROR(BracketFailure, Solver)
RYDSI_DEFINE_ERROR(StateCrossing, Solver)
RYDSI_DEFINE_ERROR(NotConverged, Solver)
RYDSI_DEFINE_ERROR(CatalogInsufficient, Solver)
RYDSI_DEFINE_ERROR(IoError, Io)

#undef RYDSI_DEFINE_ERROR

}  // namespace rydsi
