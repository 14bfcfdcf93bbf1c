#include "dsrc/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "dsrc/errors.hpp"

namespace dsrc::svgplot {

namespace {

constexpr double W = 720, H = 480;
constexpr double ML = 70, MR = 160, MT = 40, MB = 50;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

}  // namespace

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series, bool log_y) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (log_y && !(y > 0.0)) continue;
            if (log_y) y = std::log10(y);
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!(xmin <= xmax)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
    if (xmax == xmin) { xmax += 1; xmin -= 1; }
    if (ymax == ymin) { ymax += 1; ymin -= 1; }

    auto px = [&](double x) { return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR); };
    auto py = [&](double y) {
        if (log_y) y = std::log10(y);
        return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB);
    };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ContractError("svgplot: cannot open " + path.string());
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
        << "' font-family='sans-serif' font-size='12'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title
        << "</text>\n";

    // Axes.
    out << "<line x1='" << ML << "' y1='" << H - MB << "' x2='" << W - MR << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    out << "<line x1='" << ML << "' y1='" << MT << "' x2='" << ML << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        const double fyv = ymin + (ymax - ymin) * i / 4.0;
        const double fy = log_y ? std::pow(10.0, fyv) : fyv;
        out << "<text x='" << px(fx) << "' y='" << H - MB + 18
            << "' text-anchor='middle'>" << fmt(fx) << "</text>\n";
        out << "<text x='" << ML - 8 << "' y='"
            << (H - MB - (H - MT - MB) * i / 4.0 + 4) << "' text-anchor='end'>" << fmt(fy)
            << "</text>\n";
    }
    out << "<text x='" << (ML + W - MR) / 2 << "' y='" << H - 10
        << "' text-anchor='middle'>" << x_label << "</text>\n";
    out << "<text x='18' y='" << (MT + H - MB) / 2 << "' text-anchor='middle' transform='rotate(-90 18 "
        << (MT + H - MB) / 2 << ")'>" << y_label << "</text>\n";

    // Series and legend.
    double ly = MT;
    for (const auto& s : series) {
        out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (log_y && !(s.y[i] > 0.0)) continue;
            out << px(s.x[i]) << "," << py(s.y[i]) << " ";
        }
        out << "'/>\n";
        out << "<line x1='" << W - MR + 10 << "' y1='" << ly << "' x2='" << W - MR + 30
            << "' y2='" << ly << "' stroke='" << s.color << "' stroke-width='2'/>\n";
        out << "<text x='" << W - MR + 35 << "' y='" << ly + 4 << "'>" << s.label
            << "</text>\n";
        ly += 18;
    }
    out << "</svg>\n";
}

}  // namespace dsrc::svgplot
