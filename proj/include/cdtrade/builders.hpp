#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdtrade/channel.hpp"

namespace cdtrade {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

// N midpoints of equal subintervals of [a, b].
std::vector<double> quant(double a, double b, std::size_t n);

// N i.i.d. uniform draws on [a, b].
std::vector<double> samp(double a, double b, std::size_t n, std::uint64_t seed);
// N i.i.d. points, uniform per real and imaginary component of every coordinate.
std::vector<CVec> samp(const CVec& a, const CVec& b, std::size_t n, std::uint64_t seed);

// Component k is exp(j k pi sin(theta)), theta in radians.
CVec steering_vector(double theta, std::size_t n_r);

// exp(j 2 pi m / M), m = 0..M-1
CVec psk(std::size_t m);

enum class AngleUnit { Degrees, Radians };
AngleUnit parse_angle_unit(const std::string& s);
std::string to_string(AngleUnit u);

// Single-antenna transmitter, N_R-antenna receiver estimating the angle of arrival.
struct SimoParams {
  std::size_t n_r = 8;
  double sigma_n = 1.414;
  double sigma_s = 0.7;                        // prior std of theta
  AngleUnit prior_unit = AngleUnit::Radians;   // unit of sigma_s and sigma_st
  std::optional<double> sigma_st = 0.3;        // transmitter side information; nullopt = absent
  std::size_t n_theta = 4;
  std::size_t n_st = 4;
  std::size_t n_y = 20;
  CVec x_points = psk(4);
  double y_box = 1.5;                          // cloud in [-(b+bj), b+bj]^N_R
  std::uint64_t seed = 1;
  bool feedback = true;                        // phi = identity, else constant
  bool radar = false;                          // Z = (Y, X)
  AngleUnit distortion_unit = AngleUnit::Degrees;  // d in deg^2 or rad^2
};

ChannelSpec build_simo_channel(const SimoParams& p);

// Y1 = X + S1 + N1, Y2 = X + S1 + S2 + N2; side information generated from S1.
struct AwgnBcParams {
  double sigma_n1 = 0.2, sigma_n2 = 0.2;
  double sigma_s1 = 0.5, sigma_s2 = 0.3, sigma_st = 0.3;
  std::size_t n_s1 = 5, n_s2 = 5, n_st = 4, n_y1 = 5, n_y2 = 5;
  double box = 1.5;
  CVec x_points = psk(4);
  std::uint64_t seed = 7;
  bool feedback = false;  // receiver-1 output fed back to the transmitter
  // Explicit grids override the seeded clouds.
  std::optional<CVec> s1_grid, s2_grid, st_grid, y1_grid, y2_grid;
};

BCChannelSpec build_awgn_bc(const AwgnBcParams& p);

// Receiver 1 is a radar (Z1 = (Y1, X)), receiver 2 a communication user.
struct IsacParams {
  std::size_t n_r = 8;
  double sigma_n1 = 0.8, sigma_n2 = 1.0;
  double sigma_s = 0.7;
  AngleUnit prior_unit = AngleUnit::Radians;
  std::size_t n_theta = 4, n_y1 = 20, n_y2 = 20;
  CVec x_points = psk(8);
  std::optional<CVec> h2;              // default all-ones of length n_r
  bool h2_follows_angle = false;       // use h(theta) for receiver 2 as well
  bool z2_includes_state = false;      // Z2 = (Y2, S)
  double y_box = 1.5;
  std::uint64_t seed = 3;
  bool feedback = true;                // monostatic (phi = identity) or bistatic
  AngleUnit distortion_unit = AngleUnit::Degrees;
};

BCChannelSpec build_isac_bc(const IsacParams& p);

// Binary symmetric channel with a single state and zero distortion.
ChannelSpec build_bsc(double crossover);

}  // namespace cdtrade
