#include "canonmap/eval.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <memory>

#include "canonmap/error.hpp"

namespace canonmap {

namespace {

using nlohmann::json;

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::MissingInput, "cannot open " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            f(json::parse(line));
        } catch (const json::exception& e) {
            fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

CellCoord cell_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }
json cell_json(CellCoord u) { return json::array({u.row, u.col}); }

void write_lines(const std::vector<json>& lines, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    for (const auto& j : lines) out << j.dump() << '\n';
}

int argmax_index(const Eigen::VectorXd& v) {
    Eigen::Index arg = 0;
    v.maxCoeff(&arg);
    return static_cast<int>(arg);
}

}  // namespace

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
    std::vector<Annotation> records;
    for_each_json_line(path, [&](const json& j) {
        Annotation a;
        a.image = j.at("image").get<std::string>();
        a.cell = cell_from(j.at("u"));
        a.vertex = j.at("vertex").get<int>();
        if (j.contains("class")) a.category = j.at("class").get<std::string>();
        records.push_back(std::move(a));
    });
    return records;
}

std::vector<KeypointPair> load_keypoint_pairs(const std::filesystem::path& path) {
    std::vector<KeypointPair> pairs;
    for_each_json_line(path, [&](const json& j) {
        KeypointPair p;
        p.image_a = j.at("a").get<std::string>();
        p.image_b = j.at("b").get<std::string>();
        for (const auto& kp : j.at("kps")) p.keypoints.emplace_back(cell_from(kp.at(0)), cell_from(kp.at(1)));
        p.bbox_height = j.at("bbox").at(0).get<double>();
        p.bbox_width = j.at("bbox").at(1).get<double>();
        if (p.keypoints.empty()) fail(ErrorKind::Parse, path.string() + ": keypoint pair without keypoints");
        pairs.push_back(std::move(p));
    });
    return pairs;
}

void save_annotations(const std::vector<Annotation>& records, const std::filesystem::path& path) {
    std::vector<json> lines;
    for (const auto& a : records) {
        json j = {{"image", a.image}, {"u", cell_json(a.cell)}, {"vertex", a.vertex}};
        if (!a.category.empty()) j["class"] = a.category;
        lines.push_back(std::move(j));
    }
    write_lines(lines, path);
}

void save_keypoint_pairs(const std::vector<KeypointPair>& pairs, const std::filesystem::path& path) {
    std::vector<json> lines;
    for (const auto& p : pairs) {
        json kps = json::array();
        for (const auto& [a, b] : p.keypoints) kps.push_back(json::array({cell_json(a), cell_json(b)}));
        lines.push_back({{"a", p.image_a}, {"b", p.image_b}, {"kps", kps}, {"bbox", {p.bbox_height, p.bbox_width}}});
    }
    write_lines(lines, path);
}

FeatureLookup map_lookup(const std::map<std::string, FeatureMap>& maps) {
    return [&maps](const std::string& id) -> const FeatureMap& {
        auto it = maps.find(id);
        if (it == maps.end()) fail(ErrorKind::MissingInput, "missing feature map for image '" + id + "'");
        return it->second;
    };
}

VertexPredictor model_predictor(const CseModel& model) {
    auto E = std::make_shared<const Eigen::MatrixXd>(model.vertex_embeddings());
    return [&model, E](const FeatureMap& img, CellCoord u) {
        return argmax_index(*E * model.pixel_embed(img.feature(u.row, u.col)));
    };
}

VertexPredictor zero_shot_predictor(const ViewBank& bank, Pooling pooling) {
    return [&bank, pooling](const FeatureMap& img, CellCoord u) {
        return argmax_vertex(vertex_similarity(img, u, bank, pooling));
    };
}

GeodesicReport geodesic_error(const VertexPredictor& predict, const FeatureLookup& features,
                              const std::vector<Annotation>& annotations, const GeodesicTable& geo) {
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (const auto& a : annotations) {
        if (a.vertex < 0 || static_cast<std::size_t>(a.vertex) >= geo.size())
            fail(ErrorKind::InvalidIndex, "annotation vertex out of range for image '" + a.image + "'");
        const FeatureMap& img = features(a.image);
        if (!img.foreground(a.cell))
            fail(ErrorKind::InvalidArgument, "annotation cell is background in image '" + a.image + "'");
        const int k = predict(img, a.cell);
        auto& [sum, n] = sums[a.category.empty() ? "all" : a.category];
        sum += k < 0 ? kGeodesicScale : geo(k, a.vertex);
        ++n;
    }
    GeodesicReport report;
    report.count = annotations.size();
    if (sums.empty()) return report;
    for (const auto& [name, s] : sums) {
        report.per_class[name] = s.first / static_cast<double>(s.second);
        report.mean += report.per_class[name];
    }
    report.mean /= static_cast<double>(sums.size());
    return report;
}

const char* to_string(TransferRoute route) { return route == TransferRoute::ThroughMesh ? "im2m2im" : "im2im"; }

TransferRoute parse_transfer_route(const std::string& name) {
    if (name == "im2m2im") return TransferRoute::ThroughMesh;
    if (name == "im2im") return TransferRoute::Direct;
    fail(ErrorKind::InvalidArgument, "unknown transfer route '" + name + "' (expected im2m2im or im2im)");
}

CellCoord transfer_keypoint(const CseModel& model, const FeatureMap& a, const FeatureMap& b, CellCoord u_a,
                            TransferRoute route) {
    if (!a.foreground(u_a)) fail(ErrorKind::InvalidArgument, "query cell is background in the source image");
    const auto cells = b.foreground_cells();
    if (cells.empty()) fail(ErrorKind::EmptyForeground, "target image has zero foreground cells");
    const Eigen::VectorXd ea = model.pixel_embed(a.feature(u_a.row, u_a.col));

    Eigen::VectorXd target;
    if (route == TransferRoute::ThroughMesh) {
        const Eigen::MatrixXd E = model.vertex_embeddings();
        target = E.row(argmax_index(E * ea)).transpose();
    } else {
        const double n = ea.norm();
        target = n > 0.0 ? Eigen::VectorXd(ea / n) : ea;
    }
    double best = kMaskedScore;
    CellCoord arg = cells.front();
    for (CellCoord v : cells) {
        const Eigen::VectorXd eb = model.pixel_embed(b.feature(v.row, v.col));
        double score = target.dot(eb);
        if (route == TransferRoute::Direct) {
            const double n = eb.norm();
            score = n > 0.0 ? score / n : 0.0;
        }
        if (score > best) {
            best = score;
            arg = v;
        }
    }
    return arg;
}

double pck_from_transfers(const std::vector<KeypointPair>& pairs, const std::vector<std::vector<CellCoord>>& transfers,
                          double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorKind::InvalidArgument, "PCK threshold must lie in (0, 1)");
    if (transfers.size() != pairs.size()) fail(ErrorKind::DimensionMismatch, "one transfer list per pair expected");
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        if (transfers[i].size() != p.keypoints.size())
            fail(ErrorKind::DimensionMismatch, "one transfer per keypoint expected");
        const double radius = threshold * std::max(p.bbox_height, p.bbox_width);
        for (std::size_t j = 0; j < p.keypoints.size(); ++j) {
            const CellCoord want = p.keypoints[j].second, got = transfers[i][j];
            if (std::hypot(want.row - got.row, want.col - got.col) <= radius) ++hits;
            ++total;
        }
    }
    return total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

double pck(const CseModel& model, const std::vector<KeypointPair>& pairs, const FeatureLookup& features,
           double threshold, TransferRoute route) {
    std::vector<std::vector<CellCoord>> transfers;
    transfers.reserve(pairs.size());
    for (const auto& p : pairs) {
        const FeatureMap& a = features(p.image_a);
        const FeatureMap& b = features(p.image_b);
        auto& out = transfers.emplace_back();
        for (const auto& kp : p.keypoints) out.push_back(transfer_keypoint(model, a, b, kp.first, route));
    }
    return pck_from_transfers(pairs, transfers, threshold);
}

}  // namespace canonmap
