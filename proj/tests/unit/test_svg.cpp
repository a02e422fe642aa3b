#include <doctest.h>

#include "qalign/svg.hpp"

using namespace qalign;

TEST_SUITE("svg") {
  TEST_CASE("line chart is deterministic and escapes text") {
    SvgAxes axes{"Error <vs> FLOPs & more", "FLOPs", "error", true};
    std::vector<SvgSeries> series{{"qalign", {1e3, 1e4, 1e5}, {0.5, 0.4, 0.3}}, {"bon", {1e3, 1e4}, {0.5, 0.45}}};
    std::string a = svg_line_chart(axes, series);
    CHECK(a == svg_line_chart(axes, series));
    CHECK(a.rfind("<svg", 0) == 0);
    CHECK(a.find("&lt;vs&gt; FLOPs &amp; more") != std::string::npos);
    CHECK(a.find("qalign") != std::string::npos);
    CHECK(a.find("<polyline") != std::string::npos);
    CHECK(a.find("</svg>") != std::string::npos);
  }

  TEST_CASE("histogram with overlay") {
    std::vector<double> data{0.1, 0.2, 0.2, 0.4, 0.9};
    std::vector<SvgSeries> overlay{{"density", {0.0, 0.5, 1.0}, {0.5, 1.0, 0.5}}};
    std::string h = svg_histogram(SvgAxes{"h", "r", "density", false}, data, 4, overlay);
    CHECK(h.find("<rect") != std::string::npos);
    CHECK(h.find("density") != std::string::npos);
  }
}
