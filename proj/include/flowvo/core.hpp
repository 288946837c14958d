#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace flowvo {

enum class ErrorCode {
    InvalidInput,
    NearSingularRotation,
    OutOfBounds,
    InsufficientMatches,
    InsufficientData,
    InsufficientOverlap,
    DegenerateGeometry,
    Diverged,
    MissingFile,
    MalformedLine,
    NonUnitQuaternion,
    ConfigError,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::NearSingularRotation: return "NearSingularRotation";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::InsufficientMatches: return "InsufficientMatches";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
        case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
        case ErrorCode::Diverged: return "Diverged";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::MalformedLine: return "MalformedLine";
        case ErrorCode::NonUnitQuaternion: return "NonUnitQuaternion";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

struct PixelPoint {
    double x = 0.0;
    double y = 0.0;
};

inline PixelPoint operator+(PixelPoint a, PixelPoint b) { return {a.x + b.x, a.y + b.y}; }
inline PixelPoint operator-(PixelPoint a, PixelPoint b) { return {a.x - b.x, a.y - b.y}; }
inline PixelPoint operator*(PixelPoint a, double s) { return {a.x * s, a.y * s}; }

} // namespace flowvo
