#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace anomalycd {

/// Base error type for everything the engine throws on bad input.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when caller-supplied configuration is outside its documented range.
/// The CLI maps it to exit code 2.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Single-plane row-major grid. Used for density maps, binary maps and label maps.
template <class T>
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Plane() = default;
    Plane(int h, int w, T fill = T{})
        : height(h), width(w), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {
        if (h < 0 || w < 0) throw Error("negative plane dimensions");
    }

    std::size_t size() const noexcept { return data.size(); }
    std::size_t index(int y, int x) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
    }
    T& at(int y, int x) noexcept { return data[index(y, x)]; }
    const T& at(int y, int x) const noexcept { return data[index(y, x)]; }
    bool same_shape(const Plane& o) const noexcept { return height == o.height && width == o.width; }

    friend bool operator==(const Plane&, const Plane&) = default;
};

using BinaryMap = Plane<std::uint8_t>;

/// Multi-channel raster, pixel-interleaved, intensities in [0,1].
struct Raster {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<float> data;

    Raster() = default;
    Raster(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill) {
        if (h <= 0 || w <= 0 || c <= 0) throw Error("raster dimensions must be positive");
    }

    std::size_t pixel_offset(int y, int x) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels);
    }
    float& at(int y, int x, int c) noexcept { return data[pixel_offset(y, x) + static_cast<std::size_t>(c)]; }
    float at(int y, int x, int c) const noexcept { return data[pixel_offset(y, x) + static_cast<std::size_t>(c)]; }

    /// Rec.601 luma for 3+ channels, the first channel otherwise.
    float luminance(int y, int x) const noexcept {
        const std::size_t o = pixel_offset(y, x);
        if (channels >= 3) return 0.299f * data[o] + 0.587f * data[o + 1] + 0.114f * data[o + 2];
        return data[o];
    }

    bool same_shape(const Raster& o) const noexcept {
        return height == o.height && width == o.width && channels == o.channels;
    }

    /// Throws if the buffer length disagrees with the header or any value is non-finite.
    void validate() const {
        if (data.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                               static_cast<std::size_t>(channels))
            throw Error("raster data length does not match dimensions");
        for (float v : data)
            if (!std::isfinite(v)) throw Error("raster contains non-finite values");
    }

    friend bool operator==(const Raster&, const Raster&) = default;
};

}  // namespace anomalycd
