#include <charconv>
#include <cmath>
#include <sstream>

#include "hsplat/error.hpp"
#include "hsplat/render.hpp"

namespace hsplat {

namespace {

float parse_float(std::string_view text, std::string_view token) {
    // from_chars for float is unavailable on older libstdc++; go through strtof
    const std::string s(text);
    char* end = nullptr;
    const float v = std::strtof(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::invalid_input, "bad filter token '" + std::string(token) + "'");
    }
    return v;
}

}  // namespace

PostFilter PostFilter::parse(std::string_view token) {
    PostFilter f;
    const auto colon = token.find(':');
    const std::string_view head = token.substr(0, colon);
    const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : token.substr(colon + 1);
    if (head == "identity" && colon == std::string_view::npos) {
        f.kind = Kind::identity;
    } else if (head == "gamma") {
        f.kind = Kind::gamma;
        f.gamma = parse_float(arg, token);
        if (!(f.gamma > 0.0f)) {
            throw Error(ErrorCode::invalid_input, "gamma must be > 0");
        }
    } else if (head == "box3" && colon == std::string_view::npos) {
        f.kind = Kind::conv3;
        f.kernel.fill(1.0f / 9.0f);
    } else if (head == "conv3") {
        f.kind = Kind::conv3;
        std::vector<float> values;
        std::size_t start = 0;
        while (!arg.empty() && start <= arg.size()) {
            const auto comma = arg.find(',', start);
            const auto piece = arg.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            values.push_back(parse_float(piece, token));
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        if (values.size() != 9) {
            throw Error(ErrorCode::invalid_input, "conv3 kernel needs 9 entries, got " + std::to_string(values.size()));
        }
        std::copy(values.begin(), values.end(), f.kernel.begin());
    } else {
        throw Error(ErrorCode::invalid_input, "unknown filter '" + std::string(token) + "'");
    }
    return f;
}

std::string PostFilter::token() const {
    std::ostringstream out;
    switch (kind) {
    case Kind::identity: return "identity";
    case Kind::gamma: out << "gamma:" << gamma; return out.str();
    case Kind::conv3:
        out << "conv3:";
        for (std::size_t i = 0; i < 9; ++i) {
            out << (i ? "," : "") << kernel[i];
        }
        return out.str();
    }
    return "identity";
}

std::vector<PostFilter> parse_filter_chain(std::span<const std::string> tokens) {
    std::vector<PostFilter> chain;
    for (const auto& t : tokens) {
        chain.push_back(PostFilter::parse(t));
    }
    return chain;
}

Image postprocess_apply(const Image& img, std::span<const PostFilter> chain) {
    Image cur = img;
    for (const PostFilter& f : chain) {
        switch (f.kind) {
        case PostFilter::Kind::identity: break;
        case PostFilter::Kind::gamma: {
            if (!(f.gamma > 0.0f)) {
                throw Error(ErrorCode::invalid_input, "gamma must be > 0");
            }
            const float e = 1.0f / f.gamma;
            for (float& v : cur.rgb) {
                v = std::copysign(std::pow(std::abs(v), e), v);
            }
            break;
        }
        case PostFilter::Kind::conv3: {
            Image next(cur.width, cur.height);
            for (int y = 0; y < cur.height; ++y) {
                for (int x = 0; x < cur.width; ++x) {
                    for (int c = 0; c < 3; ++c) {
                        float acc = 0.0f;
                        for (int dy = -1; dy <= 1; ++dy) {
                            const int sy = std::clamp(y + dy, 0, cur.height - 1);
                            for (int dx = -1; dx <= 1; ++dx) {
                                const int sx = std::clamp(x + dx, 0, cur.width - 1);
                                acc += f.kernel[static_cast<std::size_t>((dy + 1) * 3 + dx + 1)] * cur.pixel(sx, sy)[c];
                            }
                        }
                        next.pixel(x, y)[c] = acc;
                    }
                }
            }
            cur = std::move(next);
            break;
        }
        }
    }
    return cur;
}

}  // namespace hsplat
