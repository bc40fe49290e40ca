#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "canonmap/cse_model.hpp"
#include "canonmap/features.hpp"
#include "canonmap/geodesics.hpp"
#include "canonmap/pseudo_gt.hpp"

namespace canonmap {

struct Annotation {
    std::string image;
    CellCoord cell;
    int vertex = 0;
    std::string category;  // optional "class" field; empty groups under "all"
};

struct KeypointPair {
    std::string image_a, image_b;
    std::vector<std::pair<CellCoord, CellCoord>> keypoints;  // (u_A, u_B)
    double bbox_height = 0.0, bbox_width = 0.0;              // of B, in cells
};

// Line-delimited JSON:
//   {"image": id, "u": [r, c], "vertex": k, "class": name?}
//   {"a": id, "b": id, "kps": [[[r, c], [r, c]], ...], "bbox": [h, w]}
std::vector<Annotation> load_annotations(const std::filesystem::path& path);
std::vector<KeypointPair> load_keypoint_pairs(const std::filesystem::path& path);
void save_annotations(const std::vector<Annotation>& records, const std::filesystem::path& path);
void save_keypoint_pairs(const std::vector<KeypointPair>& pairs, const std::filesystem::path& path);

// Returns the feature map of an image id; throws MissingInput when absent.
using FeatureLookup = std::function<const FeatureMap&(const std::string&)>;
FeatureLookup map_lookup(const std::map<std::string, FeatureMap>& maps);

// Predicts a vertex for one image cell.
using VertexPredictor = std::function<int(const FeatureMap&, CellCoord)>;

// argmax_k p(x_k | u) under the model.
VertexPredictor model_predictor(const CseModel& model);
// Pseudo-GT argmax over a view bank (no training).
VertexPredictor zero_shot_predictor(const ViewBank& bank, Pooling pooling);

struct GeodesicReport {
    double mean = 0.0;  // average of the class means
    std::map<std::string, double> per_class;
    std::size_t count = 0;
};

// Errors are pooled per class; the reported mean averages the class means.
GeodesicReport geodesic_error(const VertexPredictor& predict, const FeatureLookup& features,
                              const std::vector<Annotation>& annotations, const GeodesicTable& geo);
inline GeodesicReport geodesic_error(const CseModel& model, const FeatureLookup& features,
                                     const std::vector<Annotation>& annotations, const GeodesicTable& geo) {
    return geodesic_error(model_predictor(model), features, annotations, geo);
}

enum class TransferRoute { ThroughMesh, Direct };

const char* to_string(TransferRoute route);
TransferRoute parse_transfer_route(const std::string& name);

// ThroughMesh: k = argmax_k p(x_k | u_A), then the foreground cell of B whose
// embedding has the largest inner product with e(x_k). Direct: the
// foreground cell of B with the highest cosine similarity between pixel
// embeddings. Throws EmptyForeground when B has none.
CellCoord transfer_keypoint(const CseModel& model, const FeatureMap& a, const FeatureMap& b, CellCoord u_a,
                            TransferRoute route = TransferRoute::ThroughMesh);

// Fraction of keypoints whose transfer lands within threshold * max(bbox
// side) of the annotated target cell.
double pck(const CseModel& model, const std::vector<KeypointPair>& pairs, const FeatureLookup& features,
           double threshold = 0.1, TransferRoute route = TransferRoute::ThroughMesh);

// Same, from precomputed transfers; exposed so the metric can be checked
// independently of a model.
double pck_from_transfers(const std::vector<KeypointPair>& pairs, const std::vector<std::vector<CellCoord>>& transfers,
                          double threshold);

}  // namespace canonmap
