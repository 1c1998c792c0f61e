#include "sid/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sid {

static unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void save_ppm(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_ppm: cannot open " + path);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> buf(img.rgb.size());
    for (std::size_t i = 0; i < img.rgb.size(); ++i) buf[i] = to_byte(img.rgb[i]);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Image load_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_ppm: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    f >> magic >> w >> h >> maxv;
    if (magic != "P6" || w <= 0 || h <= 0 || maxv != 255)
        throw std::runtime_error("load_ppm: unsupported format in " + path);
    f.get();  // single whitespace after header
    Image img;
    img.width = w;
    img.height = h;
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("load_ppm: truncated file " + path);
    img.rgb.resize(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) img.rgb[i] = buf[i] / 255.0;
    return img;
}

void save_pgm(const std::string& path, int width, int height,
              const std::vector<double>& gray) {
    if (gray.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("save_pgm: size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_pgm: cannot open " + path);
    f << "P5\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> buf(gray.size());
    for (std::size_t i = 0; i < gray.size(); ++i) buf[i] = to_byte(gray[i]);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace sid
