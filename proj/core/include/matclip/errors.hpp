#pragma once

#include <stdexcept>
#include <string>

namespace matclip {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyMask : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct ZeroVector : Error { using Error::Error; };
struct OutOfBounds : Error { using Error::Error; };
struct NonFiniteActivation : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct InvalidConfig : Error { using Error::Error; };
struct DuplicateId : Error { using Error::Error; };
struct NonUnitNorm : Error { using Error::Error; };
struct InsufficientDistinctMaterials : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct BadMagic : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };

}  // namespace matclip
