#pragma once

#include <filesystem>
#include <string>

#include "irib/numerics/tensor.hpp"

namespace irib::harness {

/// 8-bit RGB PNG from [1,3,H,W] values in [0,1]: v * 255 rounded half to
/// even after clamping.
void write_png(const std::filesystem::path& path, const Tensor& img);
/// [1,3,H,W] in [0,1]. Gray, alpha and 16-bit inputs are converted to 8-bit RGB.
Tensor read_png(const std::filesystem::path& path);

/// The 8-bit code written for value v.
unsigned char to_byte(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace irib::harness
