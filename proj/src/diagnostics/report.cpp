#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ahsnpe/csv.hpp"
#include "ahsnpe/diagnostics.hpp"

namespace ahsnpe {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kMargin = 50;
constexpr int kDensityBins = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::pair<double, double>> histogram_density(const Vector& v) {
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  if (!(hi > lo)) return {{lo, 1.0}};
  const double width = (hi - lo) / kDensityBins;
  std::vector<double> counts(kDensityBins, 0.0);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    counts[std::min<std::size_t>(kDensityBins - 1, static_cast<std::size_t>((v[i] - lo) / width))] += 1.0;
  std::vector<std::pair<double, double>> pts;
  for (int b = 0; b < kDensityBins; ++b)
    pts.emplace_back(lo + (b + 0.5) * width, counts[static_cast<std::size_t>(b)] / (static_cast<double>(v.size()) * width));
  return pts;
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<std::vector<std::pair<double, double>>>& series) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (const auto& [x, y] : s) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!(x1 > x0)) { x0 -= 0.5; x1 += 0.5; }
  if (!(y1 > y0)) { y0 -= 0.5; y1 += 0.5; }
  const double pw = kWidth - 2.0 * kMargin, ph = kHeight - 2.0 * kMargin;
  auto sx = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kHeight - kMargin - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(title)
    << "</text>\n"
    << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin << "\" y2=\""
    << kHeight - kMargin << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\"" << kHeight - kMargin
    << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 16 << "\" font-size=\"10\">" << format_double(x0)
    << "</text>\n"
    << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 16
    << "\" text-anchor=\"end\" font-size=\"10\">" << format_double(x1) << "</text>\n"
    << "<text x=\"4\" y=\"" << kHeight - kMargin << "\" font-size=\"10\">" << format_double(y0) << "</text>\n"
    << "<text x=\"4\" y=\"" << kMargin << "\" font-size=\"10\">" << format_double(y1) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* colour = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
    bool first = true;
    for (const auto& [x, y] : series[k]) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      o << (first ? "" : " ") << sx(x) << "," << sy(y);
      first = false;
    }
    o << "\"/>\n";
    if (k < labels.size())
      o << "<text x=\"" << kWidth - kMargin - 4 << "\" y=\"" << kMargin + 14 * (static_cast<int>(k) + 1)
        << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << colour << "\">" << escape_xml(labels[k])
        << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<std::filesystem::path> emit_reports(const ReportInput& in, const std::filesystem::path& out_dir) {
  if (in.history.empty()) throw InvalidArgument("nothing to report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  const auto d = in.history.front().theta_g.size();
  std::vector<std::string> names = in.parameter_names;
  for (auto k = static_cast<Eigen::Index>(names.size()); k < d; ++k) names.push_back("theta" + std::to_string(k));
  std::vector<std::filesystem::path> written;

  std::vector<std::string> header{"round", "relative_change"};
  for (const auto& n : names) header.push_back("theta_g_" + n);
  if (in.reference_samples) header.push_back("mahalanobis_reference");
  Matrix trace(static_cast<Eigen::Index>(in.history.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t t = 0; t < in.history.size(); ++t) {
    const auto& r = in.history[t];
    const auto row = static_cast<Eigen::Index>(t);
    trace(row, 0) = r.round;
    trace(row, 1) = r.relative_change ? *r.relative_change : std::nan("");
    trace.row(row).segment(2, d) = r.theta_g.transpose();
    if (in.reference_samples) trace(row, 2 + d) = mahalanobis(r.theta_g, *in.reference_samples);
  }
  written.push_back(out_dir / "convergence.csv");
  write_csv(written.back(), header, trace);

  written.push_back(out_dir / "sigma_g_map.csv");
  write_csv(written.back(), names, in.history.back().sigma_g);

  if (in.local_means.size()) {
    std::vector<std::string> h{"observation"};
    for (const auto& n : names) h.push_back(n);
    Matrix m(in.local_means.rows(), d + 1);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, 0) = static_cast<double>(i);
      m.row(i).tail(d) = in.local_means.row(i);
    }
    written.push_back(out_dir / "local_means.csv");
    write_csv(written.back(), h, m);
  }

  if (in.group_samples.size()) {
    std::vector<std::string> h;
    for (const auto& n : names) h.push_back("theta_g_" + n);
    for (Eigen::Index c = 0; c < d; ++c)
      for (Eigen::Index r = 0; r < d; ++r)
        h.push_back("sigma_g_" + names[static_cast<std::size_t>(r)] + "_" + names[static_cast<std::size_t>(c)]);
    written.push_back(out_dir / "group_posterior_samples.csv");
    write_csv(written.back(), h, in.group_samples);

    std::vector<std::vector<std::pair<double, double>>> dens;
    for (Eigen::Index k = 0; k < d; ++k) dens.push_back(histogram_density(in.group_samples.col(k)));
    written.push_back(out_dir / "group_density.svg");
    write_text(written.back(), svg_line_plot("group-level posterior densities", names, dens));
  }

  if (!in.ppc.empty()) {
    const auto m = in.ppc.front().observed.size();
    Matrix table(static_cast<Eigen::Index>(in.ppc.size()) * m, 7);
    for (std::size_t i = 0; i < in.ppc.size(); ++i)
      for (Eigen::Index k = 0; k < m; ++k) {
        const auto& p = in.ppc[i];
        table.row(static_cast<Eigen::Index>(i) * m + k) << static_cast<double>(i), static_cast<double>(k),
            p.observed[k], p.pred_mean[k], p.pred_sd[k], p.z[k], p.z_available ? 1.0 : 0.0;
      }
    written.push_back(out_dir / "ppc.csv");
    write_csv(written.back(), {"observation", "statistic", "observed", "pred_mean", "pred_sd", "z", "z_available"},
              table);
  }

  std::vector<std::vector<std::pair<double, double>>> lines(static_cast<std::size_t>(d));
  for (const auto& r : in.history)
    for (Eigen::Index k = 0; k < d; ++k) lines[static_cast<std::size_t>(k)].emplace_back(r.round, r.theta_g[k]);
  written.push_back(out_dir / "convergence.svg");
  write_text(written.back(), svg_line_plot("group-level mean by round", names, lines));
  return written;
}

}  // namespace ahsnpe
