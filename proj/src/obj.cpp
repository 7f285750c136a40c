#include <charconv>
#include <cmath>
#include <string_view>

#include "hsplat/asset_io.hpp"
#include "hsplat/error.hpp"

namespace hsplat {

namespace {

std::string_view next_token(std::string_view& line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
        ++i;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') {
        ++j;
    }
    const std::string_view tok = line.substr(i, j - i);
    line.remove_prefix(j);
    return tok;
}

bool parse_float(std::string_view tok, float& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size() && std::isfinite(out);
}

}  // namespace

MeshAsset parse_mesh_obj(std::span<const std::byte> bytes) {
    const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    MeshAsset mesh;
    std::vector<Vec3f> colors;
    std::vector<std::vector<long long>> faces;
    std::vector<std::size_t> face_lines;

    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;

        const std::string_view keyword = next_token(line);
        if (keyword == "v") {
            float v[6];
            int n = 0;
            for (std::string_view tok = next_token(line); !tok.empty(); tok = next_token(line)) {
                if (n == 6 || !parse_float(tok, v[n])) {
                    throw Error(ErrorCode::parse, "bad vertex on line " + std::to_string(line_no));
                }
                ++n;
            }
            if (n != 3 && n != 4 && n != 6) {
                throw Error(ErrorCode::parse, "vertex needs 3 coordinates on line " + std::to_string(line_no));
            }
            mesh.vertices.emplace_back(v[0], v[1], v[2]);
            if (n == 6) {
                colors.emplace_back(v[3], v[4], v[5]);
            }
        } else if (keyword == "f") {
            std::vector<long long> face;
            for (std::string_view tok = next_token(line); !tok.empty(); tok = next_token(line)) {
                // "i", "i/t", "i//n", "i/t/n": only the position index matters
                const std::string_view head = tok.substr(0, tok.find('/'));
                long long index = 0;
                auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), index);
                if (ec != std::errc() || ptr != head.data() + head.size() || index == 0) {
                    throw Error(ErrorCode::parse, "bad face index on line " + std::to_string(line_no));
                }
                face.push_back(index);
            }
            if (face.size() < 3) {
                throw Error(ErrorCode::parse, "face needs 3+ indices on line " + std::to_string(line_no));
            }
            faces.push_back(std::move(face));
            face_lines.push_back(line_no);
        }
        // vt, vn, o, g, s, usemtl, mtllib, comments: ignored
    }

    const auto vertex_count = static_cast<long long>(mesh.vertices.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        std::vector<std::uint32_t> idx;
        idx.reserve(faces[f].size());
        for (long long raw : faces[f]) {
            // negative indices count back from the end of the vertex list
            const long long resolved = raw > 0 ? raw - 1 : vertex_count + raw;
            if (resolved < 0 || resolved >= vertex_count) {
                throw Error(ErrorCode::bounds, "face index " + std::to_string(raw) + " out of range on line " +
                                                   std::to_string(face_lines[f]));
            }
            idx.push_back(static_cast<std::uint32_t>(resolved));
        }
        for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
            const std::array<std::uint32_t, 3> tri = {idx[0], idx[k], idx[k + 1]};
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
                continue;
            }
            mesh.triangles.push_back(tri);
        }
    }

    if (!colors.empty()) {
        if (colors.size() != mesh.vertices.size()) {
            throw Error(ErrorCode::parse, "vertex colors must be given for all vertices or none");
        }
        mesh.vertex_colors = std::move(colors);
    }
    return mesh;
}

MeshAsset load_mesh_obj(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_mesh_obj(bytes);
}

}  // namespace hsplat
