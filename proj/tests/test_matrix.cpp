#include <gtest/gtest.h>

#include "dalr/matrix.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

using namespace dalr;
using namespace dalr::testing;

TEST(DenseMatrix, ConstructionChecksDataLength)
{
    EXPECT_THROW(DenseMatrix(2, 3, std::vector<double>(5)), DimensionError);
    DenseMatrix m(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
    EXPECT_EQ(m(1, 0), 4.0);
    EXPECT_EQ(m.shape(), "2x3");
}

TEST(DenseMatrix, FromRowsRejectsRaggedInput)
{
    EXPECT_THROW(DenseMatrix::from_rows({{1, 2}, {3}}), DimensionError);
}

TEST(MatrixOps, FrobeniusNormOfZeroIsZero)
{
    EXPECT_EQ(frobenius_norm(DenseMatrix(4, 3)), 0.0);
}

TEST(MatrixOps, FrobeniusNormThreeFourFive)
{
    const double d[] = {3.0, 4.0};
    EXPECT_DOUBLE_EQ(frobenius_norm(DenseMatrix::diagonal(d)), 5.0);
}

TEST(MatrixOps, FrobeniusNormSurvivesLargeEntries)
{
    DenseMatrix m(1, 2, std::vector<double>{1e200, 1e200});
    EXPECT_NEAR(frobenius_norm(m) / 1e200, std::sqrt(2.0), 1e-15);
}

TEST(MatrixOps, MatmulMatchesNaiveTripleLoop)
{
    Rng rng(11);
    const DenseMatrix a = random_matrix(3, 4, rng);
    const DenseMatrix b = random_matrix(4, 2, rng);
    const DenseMatrix c = matmul(a, b);
    const DenseMatrix ref = naive_matmul(a, b);
    ASSERT_EQ(c.rows(), 3u);
    ASSERT_EQ(c.cols(), 2u);
    // Same summation order over k, so the results agree bitwise.
    EXPECT_EQ(c, ref);
}

TEST(MatrixOps, TransposedProductsAgreeWithExplicitTranspose)
{
    Rng rng(12);
    const DenseMatrix a = random_matrix(5, 3, rng);
    const DenseMatrix b = random_matrix(4, 3, rng);
    const DenseMatrix c = random_matrix(5, 2, rng);
    const DenseMatrix nt = matmul_nt(a, b);
    const DenseMatrix nt_ref = naive_matmul(a, naive_transpose(b));
    const DenseMatrix tn = matmul_tn(a, c);
    const DenseMatrix tn_ref = naive_matmul(naive_transpose(a), c);
    for (std::size_t i = 0; i < nt.size(); ++i)
        EXPECT_NEAR(nt.data()[i], nt_ref.data()[i], 1e-14);
    for (std::size_t i = 0; i < tn.size(); ++i)
        EXPECT_NEAR(tn.data()[i], tn_ref.data()[i], 1e-14);
}

TEST(MatrixOps, ShapeMismatchNamesBothShapes)
{
    try {
        matmul(DenseMatrix(2, 3), DenseMatrix(4, 2));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos);
        EXPECT_NE(msg.find("4x2"), std::string::npos);
    }
    EXPECT_THROW(subtract(DenseMatrix(2, 2), DenseMatrix(2, 3)), DimensionError);
    EXPECT_THROW(add_scaled_identity(DenseMatrix(2, 3), 1.0), DimensionError);
}

TEST(MatrixOps, AddScaledIdentityTouchesOnlyDiagonal)
{
    const DenseMatrix m = add_scaled_identity(DenseMatrix::from_rows({{1, 2}, {3, 4}}), 0.5);
    EXPECT_EQ(m, DenseMatrix::from_rows({{1.5, 2}, {3, 4.5}}));
}

TEST(MatrixOps, TransposeIsInvolution)
{
    Rng rng(13);
    const DenseMatrix a = random_matrix(3, 7, rng);
    EXPECT_EQ(transpose(transpose(a)), a);
    EXPECT_EQ(transpose(a), naive_transpose(a));
}

TEST(MatrixOps, SelectRowsAndColumns)
{
    const DenseMatrix a = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    const std::size_t rows[] = {2, 0};
    const std::size_t cols[] = {1};
    EXPECT_EQ(select_rows(a, rows), DenseMatrix::from_rows({{7, 8, 9}, {1, 2, 3}}));
    EXPECT_EQ(select_cols(a, cols), DenseMatrix::from_rows({{2}, {5}, {8}}));
    const std::size_t bad[] = {3};
    EXPECT_THROW(select_rows(a, bad), RangeError);
}
