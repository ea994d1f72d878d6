#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "orbit_census/billiard.hpp"
#include "orbit_census/transfer.hpp"

using namespace orbit_census;

namespace {

Word w(const char* text) { return parse_word(text, 3); }

const double kTriangleOrbit = 3.0 * (6.0 - std::sqrt(3.0));

// Closed form for the 123 orbit: reflection points on the rays from each
// center toward the centroid, distance r from the center.
double symmetric_123_length(double side, double r) {
  const double to_centroid = side / std::sqrt(3.0);
  const double inner = to_centroid - r;  // distance from centroid to each reflection point
  return 3.0 * inner * std::sqrt(3.0);
}

BilliardScene moved(const BilliardScene& base, double angle, Vec2 shift) {
  std::vector<Disk> disks;
  for (const auto& d : base.disks()) {
    const double x = std::cos(angle) * d.center[0] - std::sin(angle) * d.center[1] + shift[0];
    const double y = std::sin(angle) * d.center[0] + std::cos(angle) * d.center[1] + shift[1];
    disks.push_back(Disk{{x, y}, d.radius});
  }
  return BilliardScene(disks);
}

}  // namespace

TEST(Scene, SymmetricPasses) {
  const auto scene = BilliardScene::symmetric_three();
  EXPECT_TRUE(scene.certificate().pass);
  // distance from the third center to the opposite segment, minus r (stadium) and r (disk)
  EXPECT_NEAR(scene.certificate().margin, 3 * std::sqrt(3.0) - 2.0, 1e-9);
}

TEST(Scene, LargeRadiiFail) {
  const double h = 3 * std::sqrt(3.0);
  const auto cert = validate_scene({Disk{{0, 0}, 2.7}, Disk{{6, 0}, 2.7}, Disk{{3, h}, 2.7}});
  EXPECT_FALSE(cert.pass);
  EXPECT_NEAR(cert.margin, (h - 2.7) - 2.7, 1e-9);
  EXPECT_THROW(BilliardScene({Disk{{0, 0}, 2.7}, Disk{{6, 0}, 2.7}, Disk{{3, h}, 2.7}}), Error);
}

TEST(Scene, CoincidentDisksOverlap) {
  try {
    validate_scene({Disk{{0, 0}, 1}, Disk{{0, 0}, 1}, Disk{{6, 0}, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Overlap);
  }
}

TEST(Scene, UnequalRadiiHullIsTapered) {
  // Hull of a big and a small disk; a third disk sits beside the small end,
  // outside the tapered hull but inside the stadium of the larger radius.
  const std::vector<Disk> disks{Disk{{0, 0}, 3.0}, Disk{{10, 0}, 0.5}, Disk{{10, 3.2}, 0.5}};
  const auto cert = validate_scene(disks);
  EXPECT_TRUE(cert.pass);
  EXPECT_LT(geom::point_segment_distance(disks[2].center, disks[0].center, disks[1].center) - 3.0, 0.5);
}

TEST(Orbit, TwoOrbitsHaveLengthEight) {
  const auto scene = BilliardScene::symmetric_three();
  for (const char* code : {"12", "13", "23", "21"}) {
    const auto path = solve_orbit(scene, w(code));
    EXPECT_NEAR(path.total_length, 8.0, 1e-10) << code;
    EXPECT_LE(path.residual, 1e-12);
    EXPECT_NEAR(path.segment_lengths[0], 4.0, 1e-10);
  }
}

TEST(Orbit, TriangleOrbitClosedForm) {
  const auto scene = BilliardScene::symmetric_three();
  EXPECT_NEAR(symmetric_123_length(6.0, 1.0), kTriangleOrbit, 1e-12);
  const auto a = solve_orbit(scene, w("123"));
  const auto b = solve_orbit(scene, w("132"));
  EXPECT_NEAR(a.total_length, kTriangleOrbit, 1e-9);
  EXPECT_NEAR(b.total_length, a.total_length, 1e-12);
  EXPECT_LE(a.residual, 1e-12);
}

TEST(Orbit, InadmissibleCode) {
  const auto scene = BilliardScene::symmetric_three();
  for (const char* code : {"11", "121", "1"}) {
    try {
      solve_orbit(scene, w(code));
      FAIL() << code;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InadmissibleWord);
    }
  }
}

TEST(Orbit, LocalMinimumAndReflectionLaw) {
  const auto scene = BilliardScene::symmetric_three(6.0, 1.3);
  for (int n = 2; n <= 8; ++n)
    for (const auto& code : primitive_orbit_words(scene.coding_matrix(), n)) {
      const auto path = solve_orbit(scene, code);
      EXPECT_LE(path.residual, 1e-12);
      // reflection law checked directly from the points
      for (std::size_t j = 0; j < code.size(); ++j) {
        const Vec2 p = path.points[j];
        const Vec2 prev = path.points[(j + code.size() - 1) % code.size()];
        const Vec2 next = path.points[(j + 1) % code.size()];
        const Vec2 normal = geom::scale(geom::sub(p, scene.disks()[code[j]].center), 1.0 / scene.disks()[code[j]].radius);
        const Vec2 in = geom::sub(prev, p), out = geom::sub(next, p);
        const double cos_in = geom::dot(in, normal) / geom::norm(in);
        const double cos_out = geom::dot(out, normal) / geom::norm(out);
        EXPECT_NEAR(cos_in, cos_out, 1e-10);
        EXPECT_GT(cos_in, 0.0);
      }
      // perturbing any angle by 1e-4 increases the length
      for (std::size_t j = 0; j < code.size(); ++j)
        for (double d : {-1e-4, 1e-4}) {
          double total = 0.0;
          std::vector<Vec2> pts = path.points;
          const Disk& disk = scene.disks()[code[j]];
          const double a = path.angles[j] + d;
          pts[j] = {disk.center[0] + disk.radius * std::cos(a), disk.center[1] + disk.radius * std::sin(a)};
          for (std::size_t i = 0; i < pts.size(); ++i) total += geom::norm(geom::sub(pts[(i + 1) % pts.size()], pts[i]));
          EXPECT_GT(total, path.total_length);
        }
    }
}

TEST(Orbit, RotationInvarianceOfCodes) {
  const auto scene = moved(BilliardScene::symmetric_three(6.5, 1.1), 0.3, {0.2, -0.7});
  for (const auto& code : primitive_orbit_words(scene.coding_matrix(), 7)) {
    const auto base = solve_orbit(scene, code);
    for (std::size_t r = 1; r < code.size(); ++r) {
      const auto rotated = solve_orbit(scene, rotate(code, r));
      EXPECT_NEAR(rotated.total_length, base.total_length, 1e-12);
      EXPECT_NEAR(rotated.angles[0], base.angles[r], 1e-9);
    }
    Word reversed(code.rbegin(), code.rend());
    EXPECT_NEAR(solve_orbit(scene, reversed).total_length, base.total_length, 1e-12);
  }
}

TEST(Orbit, IsometryEquivariance) {
  const std::vector<Disk> disks{Disk{{0, 0}, 1.0}, Disk{{7, 0.5}, 1.4}, Disk{{3, 6}, 0.8}, Disk{{-2, 5}, 0.9}};
  const BilliardScene scene(disks);
  const auto spectrum = length_spectrum(scene, 5);
  for (auto [angle, shift] : {std::pair{1.1, Vec2{3.0, -4.0}}, std::pair{-2.5, Vec2{-10.0, 0.25}}}) {
    const auto other = length_spectrum(moved(scene, angle, shift), 5);
    ASSERT_EQ(other.size(), spectrum.size());
    for (std::size_t i = 0; i < spectrum.size(); ++i) EXPECT_NEAR(other[i].length, spectrum[i].length, 1e-10);
  }
}

TEST(Orbit, MultistartAgrees) {
  const auto scene = BilliardScene::symmetric_three();
  for (const char* code : {"123", "1213", "12323"}) EXPECT_LE(multistart_spread(scene, w(code), 10, 42), 1e-10);
}

TEST(Spectrum, SymmetricSmallPeriods) {
  const auto scene = BilliardScene::symmetric_three();
  const auto two = length_spectrum(scene, 2);
  ASSERT_EQ(two.size(), 3u);
  for (const auto& e : two) EXPECT_NEAR(e.length, 8.0, 1e-10);
  const auto three = length_spectrum(scene, 3);
  ASSERT_EQ(three.size(), 5u);
  EXPECT_NEAR(three[3].length, kTriangleOrbit, 1e-9);
  EXPECT_NEAR(three[4].length, kTriangleOrbit, 1e-9);
  EXPECT_EQ(three[3].orbit.canonical_word, w("123"));
  EXPECT_EQ(three[4].orbit.canonical_word, w("132"));
}

TEST(Spectrum, PerturbationSplitsTwoOrbits) {
  auto disks = BilliardScene::symmetric_three().disks();
  disks[2].center[0] += 0.1;
  const BilliardScene scene(disks);
  const auto two = length_spectrum(scene, 2);
  ASSERT_EQ(two.size(), 3u);
  EXPECT_LT(two[0].length, two[1].length);
  EXPECT_LT(two[1].length, two[2].length);
  for (const auto& e : two) {
    const auto& c = e.orbit.canonical_word;
    const double gap = geom::norm(geom::sub(disks[c[0]].center, disks[c[1]].center)) - 2.0;
    EXPECT_NEAR(e.length, 2 * gap, 1e-10);
  }
}

TEST(Geometric, TwoWordIsHalfTheTwoOrbit) {
  const auto scene = BilliardScene::symmetric_three();
  const auto f = geometric_potential(scene, 2);
  EXPECT_NEAR(f.value(w("12")), 4.0, 1e-9);
  EXPECT_EQ(f.provenance(), Provenance::BilliardGeometric);
  EXPECT_TRUE(f.positive());
  // reduced values carry a coboundary, so only orbit sums are geometric
  for (const char* code : {"12", "13", "23"}) EXPECT_NEAR(birkhoff_sum(f, w(code)), 8.0, 1e-9);
  for (const auto& [word, v] : f.entries()) EXPECT_GT(v, 0.0);
}

TEST(Geometric, BirkhoffSumsApproachOrbitLengths) {
  const auto scene = BilliardScene::symmetric_three();
  std::vector<double> worst;
  for (int k = 2; k <= 6; ++k) {
    const auto f = geometric_potential(scene, k);
    double err = 0.0;
    for (int n = 6; n <= 8; ++n)
      for (const auto& code : primitive_orbit_words(scene.coding_matrix(), n))
        err = std::max(err, std::abs(birkhoff_sum(f, code) - solve_orbit(scene, code).total_length));
    worst.push_back(err);
  }
  // geometric convergence in k: each extra symbol of depth gains a factor of at least 4
  for (std::size_t i = 1; i < worst.size(); ++i) EXPECT_LT(worst[i], 0.25 * worst[i - 1]) << i;
}

TEST(Geometric, PressureStabilizesWithDepth) {
  const auto scene = BilliardScene::symmetric_three();
  std::vector<double> P;
  for (int k = 2; k <= 7; ++k) P.push_back(solve_P(geometric_potential(scene, k)));
  for (std::size_t i = 2; i < P.size(); ++i)
    EXPECT_LT(std::abs(P[i] - P[i - 1]), std::abs(P[i - 1] - P[i - 2])) << i;
}

TEST(Geometric, LooksNonLattice) {
  const auto f = geometric_potential(BilliardScene::symmetric_three(), 4);
  EXPECT_EQ(screen_lattice(f).verdict, LatticeVerdict::LooksNonLattice);
}

TEST(Csv, SpectrumFormat) {
  const auto spectrum = length_spectrum(BilliardScene::symmetric_three(), 2);
  const auto text = spectrum_to_csv(spectrum, 3);
  const auto lines = csv::split(text, '\n');
  ASSERT_EQ(lines.size(), 5u);  // header, three rows, trailing empty piece
  EXPECT_EQ(lines[0], "code,n,primitive,length");
  EXPECT_EQ(lines[1], "12,2,1," + csv::format_real(spectrum[0].length));
  EXPECT_EQ(csv::parse_real(csv::split(lines[1])[3]), spectrum[0].length);
}
