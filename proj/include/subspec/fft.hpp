#ifndef SUBSPEC_FFT_HPP_
#define SUBSPEC_FFT_HPP_

#include <cstddef>
#include <vector>

namespace subspec {

// In-place iterative radix-2 FFT; size must be a power of two. The inverse
// transform includes the 1/n factor.
void fft_inplace(std::vector<double>& re, std::vector<double>& im, bool inverse);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

}  // namespace subspec

#endif  // SUBSPEC_FFT_HPP_
