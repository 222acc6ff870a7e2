#ifndef PAGESEG_ERRORS_HPP
#define PAGESEG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pageseg {

/// Base class for all toolkit errors. The CLI maps these to exit code 2
/// (data error), except PredictorError which maps to 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidArgumentError : Error {
    using Error::Error;
};

/// A pixel or palette color has no match in the label schema.
struct UnknownColorError : Error {
    using Error::Error;
};

struct CorruptFileError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct UpscaleRequestedError : Error {
    using Error::Error;
};

struct DimensionMismatchError : Error {
    using Error::Error;
};

struct SchemaMismatchError : Error {
    using Error::Error;
};

struct DegenerateGridError : Error {
    using Error::Error;
};

struct InsufficientCoverageError : Error {
    using Error::Error;
};

struct TileCountMismatchError : Error {
    using Error::Error;
};

struct NoFeasibleResolutionError : Error {
    using Error::Error;
};

struct EmptyMatrixError : Error {
    using Error::Error;
};

struct NotARegionClassError : Error {
    using Error::Error;
};

struct NotASeparatorClassError : Error {
    using Error::Error;
};

struct TooFewPagesError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

/// External predictor did not complete: nonzero exit, spawn failure or
/// missing output rasters.
struct PredictorError : Error {
    using Error::Error;
};

/// A predictor produced a raster with the wrong size or palette.
struct MalformedPredictionError : PredictorError {
    using PredictorError::PredictorError;
};

} // namespace pageseg

#endif
