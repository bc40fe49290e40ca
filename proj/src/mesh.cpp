#include "canonmap/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "canonmap/error.hpp"

namespace canonmap {
namespace {

struct DisjointSet {
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
    std::vector<std::size_t> parent;
};

void validate_topology(const std::vector<Vec3>& vertices, const std::vector<Face>& faces) {
    const int n = static_cast<int>(vertices.size());
    if (n == 0 || faces.empty()) fail(ErrorKind::Parse, "mesh has no vertices or faces");

    std::map<std::pair<int, int>, int> edge_use;
    DisjointSet components(vertices.size());
    std::vector<bool> referenced(vertices.size(), false);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& face = faces[f];
        for (int idx : face) {
            if (idx < 0 || idx >= n) {
                fail(ErrorKind::InvalidIndex,
                     "face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                         " outside [0, " + std::to_string(n) + ")");
            }
            referenced[idx] = true;
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
            fail(ErrorKind::DegenerateFace, "face " + std::to_string(f) + " repeats a vertex index");
        }
        for (int e = 0; e < 3; ++e) {
            int a = face[e], b = face[(e + 1) % 3];
            ++edge_use[{std::min(a, b), std::max(a, b)}];
            components.unite(a, b);
        }
    }
    for (const auto& [edge, count] : edge_use) {
        if (count > 2) {
            fail(ErrorKind::NonManifold, "edge (" + std::to_string(edge.first) + ", " +
                                             std::to_string(edge.second) + ") is shared by " +
                                             std::to_string(count) + " faces");
        }
    }
    for (std::size_t v = 0; v < vertices.size(); ++v) {
        if (!referenced[v]) {
            fail(ErrorKind::Disconnected, "vertex " + std::to_string(v) + " is not used by any face");
        }
    }
    const std::size_t root = components.find(0);
    for (std::size_t v = 1; v < vertices.size(); ++v) {
        if (components.find(v) != root) {
            fail(ErrorKind::Disconnected, "mesh has more than one connected component");
        }
    }
}

std::vector<Vec3> area_weighted_normals(const std::vector<Vec3>& vertices, const std::vector<Face>& faces) {
    std::vector<Vec3> normals(vertices.size(), Vec3::Zero());
    for (const Face& f : faces) {
        // Cross product length is twice the face area, so summing it weights by area.
        const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
        for (int idx : f) normals[idx] += n;
    }
    for (Vec3& n : normals) {
        const double len = n.norm();
        n = len > 0.0 ? Vec3(n / len) : Vec3(0.0, 0.0, 1.0);
    }
    return normals;
}

// Parses one OBJ face-vertex token ("7", "7/1", "7//3", "-1") into a 0-based index.
int parse_face_index(std::string_view token, int vertex_count, int line_no) {
    const auto slash = token.find('/');
    const std::string_view head = token.substr(0, slash);
    int value = 0;
    auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
    if (ec != std::errc() || ptr != head.data() + head.size() || value == 0) {
        fail(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad face index '" + std::string(token) + "'");
    }
    return value > 0 ? value - 1 : vertex_count + value;
}

}  // namespace

Mesh Mesh::build(std::vector<Vec3> vertices, std::vector<Face> faces) {
    validate_topology(vertices, faces);
    Mesh mesh;
    mesh.normals_ = area_weighted_normals(vertices, faces);
    mesh.vertices_ = std::move(vertices);
    mesh.faces_ = std::move(faces);
    return mesh;
}

std::vector<std::pair<int, int>> Mesh::edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(faces_.size() * 3);
    for (const Face& f : faces_) {
        for (int e = 0; e < 3; ++e) {
            int a = f[e], b = f[(e + 1) % 3];
            out.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Vec3 Mesh::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const Vec3& v : vertices_) c += v;
    return c / static_cast<double>(vertices_.size());
}

double Mesh::bounding_radius() const {
    const Vec3 c = centroid();
    double r = 0.0;
    for (const Vec3& v : vertices_) r = std::max(r, (v - c).norm());
    return r;
}

double Mesh::mean_edge_length() const {
    const auto e = edges();
    double sum = 0.0;
    for (const auto& [a, b] : e) sum += (vertices_[a] - vertices_[b]).norm();
    return sum / static_cast<double>(e.size());
}

Mesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::MissingInput, "cannot open mesh file: " + path.string());

    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z)) {
                fail(ErrorKind::Parse, path.string() + " line " + std::to_string(line_no) + ": malformed vertex");
            }
            vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<std::string> tokens;
            for (std::string tok; ss >> tok;) tokens.push_back(tok);
            if (tokens.size() != 3) {
                fail(ErrorKind::NonTriangularFace, path.string() + " line " + std::to_string(line_no) +
                                                       ": non-triangular face with " +
                                                       std::to_string(tokens.size()) + " vertices");
            }
            Face face{};
            for (int i = 0; i < 3; ++i) {
                face[i] = parse_face_index(tokens[i], static_cast<int>(vertices.size()), line_no);
            }
            faces.push_back(face);
        }
    }
    return Mesh::build(std::move(vertices), std::move(faces));
}

void save_obj(const Mesh& mesh, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << std::setprecision(17);
    for (const Vec3& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const Face& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

Mesh transformed(const Mesh& mesh, double scale, const Vec3& offset) {
    std::vector<Vec3> vertices = mesh.vertices();
    for (Vec3& v : vertices) v = scale * v + offset;
    return Mesh::build(std::move(vertices), mesh.faces());
}

Mesh make_icosphere(int subdivisions) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (Vec3& p : v) p.normalize();
    std::vector<Face> f = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
        {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
            if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
            v.push_back((v[a] + v[b]).normalized());
            const int idx = static_cast<int>(v.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(f.size() * 4);
        for (const Face& face : f) {
            const int ab = mid(face[0], face[1]);
            const int bc = mid(face[1], face[2]);
            const int ca = mid(face[2], face[0]);
            next.push_back({face[0], ab, ca});
            next.push_back({face[1], bc, ab});
            next.push_back({face[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    return Mesh::build(std::move(v), std::move(f));
}

Mesh make_cube() {
    std::vector<Vec3> v = {
        {-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
        {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1},
    };
    std::vector<Face> f = {
        {0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
        {2, 3, 7}, {2, 7, 6}, {1, 2, 6}, {1, 6, 5}, {0, 4, 7}, {0, 7, 3},
    };
    return Mesh::build(std::move(v), std::move(f));
}

Mesh make_tetrahedron() {
    const double s = 1.0 / std::sqrt(3.0);
    std::vector<Vec3> v = {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
    std::vector<Face> f = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    return Mesh::build(std::move(v), std::move(f));
}

}  // namespace canonmap
