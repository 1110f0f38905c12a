#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace causalstab
{

using Vec2 = Eigen::Vector2d;
using Point2 = Eigen::Vector2d;

/// N×2 row-major block: one (x, y) pair per row, interleaved in memory.
template <typename Scalar>
using Pairs = Eigen::Matrix<Scalar, Eigen::Dynamic, 2, Eigen::RowMajor>;

using Pairsd = Pairs<double>;
using Pairsf = Pairs<float>;

/// Row-major single-channel image plane.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Planef = Plane<float>;
using Planed = Plane<double>;

enum class Errc
{
    TooFewPoints,
    DegenerateConfiguration,
    NoConsensus,
    PointAtInfinity,
    EmptyFrame,
    DimensionMismatch,
    EmptySample,
    SpecMismatch,
    AllFramesInvalid,
    TooShort,
    ViewportUnderflow,
    SourceError,
    SinkError,
    ConfigError,
    IoError,
    InvalidArgument,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error
{
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace causalstab
