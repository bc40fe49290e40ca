#pragma once

#include <Eigen/Core>

#include <vector>

#include "canonmap/cse_model.hpp"
#include "canonmap/features.hpp"
#include "canonmap/mesh.hpp"
#include "canonmap/renderer.hpp"

namespace canonmap {

// Per-vertex intensities p / max(p).
Eigen::VectorXd vertex_heat(const Eigen::VectorXd& probs);

// Paints per-vertex intensities over a render: each mask pixel interpolates
// the heat of its face's vertices with the stored barycentrics and is mapped
// through a black-red-yellow-white ramp. Background stays black.
std::vector<float> heatmap_image(const Mesh& mesh, const RenderedView& view, const Eigen::VectorXd& heat);

// Canonical colour of a vertex: its coordinates centred on the centroid,
// divided by the bounding radius and mapped from [-1, 1] to [0, 1].
Vec3 canonical_color(const Mesh& mesh, int vertex);

// Argmax vertex per foreground cell (-1 on background).
std::vector<int> match_cells(const CseModel& model, const FeatureMap& img);

// RGB image at source resolution: each pixel takes the canonical colour of
// the vertex matched by its cell.
std::vector<float> texture_transfer_image(const Mesh& mesh, const FeatureMap& img, const std::vector<int>& matches);

// Mean Euclidean jump of canonical coordinates between 4-adjacent
// foreground cells; 0 when no adjacent pair exists.
double transfer_smoothness(const Mesh& mesh, const FeatureMap& img, const std::vector<int>& matches);

}  // namespace canonmap
