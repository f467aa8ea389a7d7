#pragma once

// JSON encoding of network weights, shared by the surrogate and inverse models.

#include <nlohmann/json.hpp>

#include "disccal/errors.hpp"
#include "disccal/mlp.hpp"

namespace disccal::detail {

inline nlohmann::json mlp_to_json(const Mlp& mlp) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : mlp.layers()) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weight.size()));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
        layers.push_back({{"out", l.weight.rows()},
                          {"in", l.weight.cols()},
                          {"weight", std::move(w)},
                          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    return {{"output_activation", mlp.output_activation() == OutputActivation::Sigmoid ? "sigmoid" : "identity"},
            {"layers", std::move(layers)}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
    std::vector<DenseLayer> layers;
    for (const auto& lj : j.at("layers")) {
        const auto out = lj.at("out").get<Eigen::Index>();
        const auto in = lj.at("in").get<Eigen::Index>();
        const auto w = lj.at("weight").get<std::vector<double>>();
        const auto b = lj.at("bias").get<std::vector<double>>();
        if (out <= 0 || in <= 0 || static_cast<Eigen::Index>(w.size()) != out * in ||
            static_cast<Eigen::Index>(b.size()) != out)
            throw ShapeError("layer weights do not match declared shape");
        DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
        for (Eigen::Index r = 0; r < out; ++r)
            for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
        for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = b[static_cast<std::size_t>(r)];
        layers.push_back(std::move(layer));
    }
    const auto act = j.at("output_activation").get<std::string>();
    return Mlp(std::move(layers), act == "sigmoid" ? OutputActivation::Sigmoid : OutputActivation::Identity);
}

} // namespace disccal::detail
