#pragma once

#include "aerothreat/error.hpp"
#include "aerothreat/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace aerothreat {

struct Series {
    std::string name;
    std::vector<double> values;
    cv::Scalar color;  // BGR
    bool dashed = false;
};

namespace detail {

inline void dashed_line(cv::Mat &img, cv::Point a, cv::Point b, const cv::Scalar &color) {
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int segments = std::max(1, static_cast<int>(len / 6.0));
    for (int i = 0; i < segments; i += 2) {
        const double t0 = static_cast<double>(i) / segments, t1 = std::min(1.0, static_cast<double>(i + 1) / segments);
        cv::Point p(static_cast<int>(a.x + (b.x - a.x) * t0), static_cast<int>(a.y + (b.y - a.y) * t0));
        cv::Point q(static_cast<int>(a.x + (b.x - a.x) * t1), static_cast<int>(a.y + (b.y - a.y) * t1));
        cv::line(img, p, q, color, 2, cv::LINE_AA);
    }
}

}  // namespace detail

/// Line chart of per-epoch series written as PNG.
inline void plot_series(const std::vector<Series> &series, const std::string &title, const std::string &y_label,
                        const std::filesystem::path &path, int width = 800, int height = 500) {
    cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
    const int left = 70, right = 190, top = 40, bottom = 50;
    const int pw = width - left - right, ph = height - top - bottom;
    std::size_t n = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto &s : series) {
        n = std::max(n, s.values.size());
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (n == 0 || !std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo < 1e-9) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto px = [&](std::size_t i) {
        return left + (n <= 1 ? pw / 2 : static_cast<int>(std::lround(static_cast<double>(i) * pw / (n - 1))));
    };
    auto py = [&](double v) { return top + static_cast<int>(std::lround((hi - v) / (hi - lo) * ph)); };

    const cv::Scalar axis(0, 0, 0), grid(225, 225, 225);
    for (int k = 0; k <= 5; ++k) {
        const double v = lo + (hi - lo) * k / 5.0;
        cv::line(img, {left, py(v)}, {left + pw, py(v)}, grid, 1);
        cv::putText(img, fmt::format("{:.3f}", v), {5, py(v) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, axis, 1,
                    cv::LINE_AA);
    }
    cv::rectangle(img, {left, top}, {left + pw, top + ph}, axis, 1);
    const std::size_t tick_step = std::max<std::size_t>(1, n / 10);
    for (std::size_t i = 0; i < n; i += tick_step) {
        cv::putText(img, std::to_string(i + 1), {px(i) - 5, top + ph + 18}, cv::FONT_HERSHEY_SIMPLEX, 0.4, axis, 1,
                    cv::LINE_AA);
    }
    cv::putText(img, title, {left, 25}, cv::FONT_HERSHEY_SIMPLEX, 0.6, axis, 1, cv::LINE_AA);
    cv::putText(img, "epoch", {left + pw / 2 - 20, height - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.5, axis, 1, cv::LINE_AA);
    cv::putText(img, "y: " + y_label, {left + pw + 15, top + 14 + static_cast<int>(series.size()) * 22},
                cv::FONT_HERSHEY_SIMPLEX, 0.42, cv::Scalar(90, 90, 90), 1, cv::LINE_AA);

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto &s = series[k];
        for (std::size_t i = 1; i < s.values.size(); ++i) {
            cv::Point a(px(i - 1), py(s.values[i - 1])), b(px(i), py(s.values[i]));
            if (s.dashed) {
                detail::dashed_line(img, a, b, s.color);
            } else {
                cv::line(img, a, b, s.color, 2, cv::LINE_AA);
            }
        }
        if (s.values.size() == 1) cv::circle(img, {px(0), py(s.values[0])}, 3, s.color, cv::FILLED);
        const int ly = top + 10 + static_cast<int>(k) * 22;
        if (s.dashed) {
            detail::dashed_line(img, {left + pw + 15, ly}, {left + pw + 45, ly}, s.color);
        } else {
            cv::line(img, {left + pw + 15, ly}, {left + pw + 45, ly}, s.color, 2, cv::LINE_AA);
        }
        cv::putText(img, s.name, {left + pw + 52, ly + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.42, axis, 1, cv::LINE_AA);
    }
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (!cv::imwrite(path.string(), img, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
        throw IoError(fmt::format("cannot write plot '{}'", path.string()));
    }
}

enum class AccuracyView { SeparateHeads, MeanOfHeads };

struct CurvePaths {
    std::filesystem::path accuracy;
    std::filesystem::path loss;
};

/// Train-vs-validation accuracy and loss curves from per-epoch metrics.
inline CurvePaths plot_training_curves(const std::vector<EpochMetrics> &metrics, const std::filesystem::path &dir,
                                       AccuracyView view = AccuracyView::SeparateHeads) {
    auto column = [&](auto member) {
        std::vector<double> v;
        for (const auto &m : metrics) v.push_back(m.*member);
        return v;
    };
    const cv::Scalar blue(200, 90, 30), orange(20, 130, 240), green(60, 160, 60), red(40, 40, 210);
    std::vector<Series> acc;
    if (view == AccuracyView::SeparateHeads) {
        acc = {{"train class", column(&EpochMetrics::train_class_acc), blue, false},
               {"val class", column(&EpochMetrics::val_class_acc), orange, false},
               {"train threat", column(&EpochMetrics::train_threat_acc), green, true},
               {"val threat", column(&EpochMetrics::val_threat_acc), red, true}};
    } else {
        std::vector<double> tr, va;
        for (const auto &m : metrics) {
            tr.push_back(0.5 * (m.train_class_acc + m.train_threat_acc));
            va.push_back(0.5 * (m.val_class_acc + m.val_threat_acc));
        }
        acc = {{"train (mean)", tr, blue, false}, {"val (mean)", va, orange, false}};
    }
    CurvePaths out{dir / "accuracy.png", dir / "loss.png"};
    plot_series(acc, "Training vs. Validation Accuracy", "accuracy", out.accuracy);
    plot_series({{"train loss", column(&EpochMetrics::train_loss), blue, false},
                 {"val loss", column(&EpochMetrics::val_loss), orange, false}},
                "Training vs. Validation Loss", "loss", out.loss);
    return out;
}

}  // namespace aerothreat
