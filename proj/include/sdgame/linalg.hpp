#pragma once

#include <Eigen/Dense>

namespace sdgame {

/// Largest state dimension d supported by the grids and the simulator.
inline constexpr int kMaxDim = 3;
/// Largest noise dimension d1.
inline constexpr int kMaxNoise = 6;

// Fixed-capacity dynamic types: storage is inline, so per-step arithmetic in
// the simulator never touches the heap.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using NoiseVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxNoise, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using SigmaMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxNoise>;
using NoiseMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxNoise, kMaxNoise>;

}  // namespace sdgame
