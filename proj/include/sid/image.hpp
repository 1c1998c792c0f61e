// Minimal binary PPM/PGM image I/O; images are row-major RGB doubles
// in [0,1].
#pragma once

#include <string>
#include <vector>

namespace sid {

struct Image {
    int width = 0, height = 0;
    std::vector<double> rgb;  // height * width * 3

    double& at(int y, int x, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

void save_ppm(const std::string& path, const Image& img);
Image load_ppm(const std::string& path);

// Grayscale dump, values clamped to [0,1].
void save_pgm(const std::string& path, int width, int height,
              const std::vector<double>& gray);

}  // namespace sid
