#pragma once

#include <stdexcept>
#include <string>

namespace bnav {

inline constexpr const char* kVersionTag = "bnav 1.0.0";

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// worldsim
struct WorldGenError : Error { using Error::Error; };
struct PlacementError : Error { using Error::Error; };
struct RenderError : Error { using Error::Error; };

// expert
struct NoPathError : Error { using Error::Error; };
struct ControllerTimeoutError : Error { using Error::Error; };
struct CollisionError : Error { using Error::Error; };
struct DatasetError : Error { using Error::Error; };

// model
struct DivergenceError : Error { using Error::Error; };

// mapping
struct LocalizationReject : Error { using Error::Error; };
struct NoRouteError : Error { using Error::Error; };

// io
struct IoError : Error { using Error::Error; };

}  // namespace bnav
