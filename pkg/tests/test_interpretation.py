"""Tests for the final analysis classification."""
import os
import sys
import unittest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from steadyflow.config import Tolerances
from steadyflow.interpretation import AnalysisClassifier


class TestAnalysisClassifier(unittest.TestCase):
    def setUp(self):
        self.classifier = AnalysisClassifier()

    def test_radial_and_semilinear(self):
        """A radial field with a verified F carries both labels."""
        result = self.classifier.classify(
            residual={'sup': 1e-14},
            flux={'verdict': 'single-valued', 'residual': 2e-8},
            moving_plane={'verdict': 'radial', 'center': (0.0, 0.0)},
        )
        self.assertEqual(result['classification'], ['radial', 'semilinear'])
        self.assertEqual(result['exit_code'], AnalysisClassifier.EXIT_OK)
        self.assertEqual(result['summary'], 'radial and semilinear')
        self.assertTrue(result['steady'])

    def test_affine_summary(self):
        """Affine relations are named in the summary and remarks."""
        result = self.classifier.classify(
            residual={'sup': 1e-14},
            flux={'verdict': 'single-valued', 'residual': 1e-9, 'affine': (-5.78, 0.0)},
        )
        self.assertEqual(result['summary'], 'semilinear (affine F)')
        self.assertTrue(any('affine' in r for r in result['remarks']))

    def test_branch_discrepancy(self):
        """Incompatible branches are reported with exit code zero."""
        result = self.classifier.classify(
            residual={'sup': 3e-13},
            flux={'verdict': 'branch-discrepancy', 'residual': 0.4, 'branches': [{}, {}, {}]},
            moving_plane={'verdict': 'asymmetric'},
        )
        self.assertEqual(result['classification'], ['branch-discrepancy'])
        self.assertEqual(result['exit_code'], 0)
        self.assertTrue(any('3 incompatible branches' in r for r in result['remarks']))

    def test_non_steady(self):
        """Residuals above the steady threshold short-circuit with exit code 2."""
        result = self.classifier.classify(residual={'sup': 0.3},
                                          moving_plane={'verdict': 'radial'})
        self.assertFalse(result['steady'])
        self.assertEqual(result['exit_code'], AnalysisClassifier.EXIT_NON_STEADY)
        self.assertEqual(result['classification'], ['branch-discrepancy'])

    def test_inconclusive(self):
        """Nothing certified means inconclusive with exit code 3."""
        result = self.classifier.classify(
            residual={'sup': 1e-12},
            flux={'verdict': 'single-valued', 'residual': 1e-2},
            moving_plane={'verdict': 'axis-symmetric', 'axes': [(0.0, 0.0)]},
        )
        self.assertEqual(result['classification'], ['inconclusive'])
        self.assertEqual(result['exit_code'], AnalysisClassifier.EXIT_INCONCLUSIVE)
        self.assertTrue(result['summary'].startswith('Inconclusive'))

    def test_missing_residual_is_not_steady(self):
        """A run without a residual cannot be called steady."""
        result = self.classifier.classify(residual={})
        self.assertEqual(result['exit_code'], 2)

    def test_threshold_follows_tolerances(self):
        """The steady threshold comes from the tolerances."""
        loose = AnalysisClassifier(Tolerances(steady_threshold=1e-2))
        self.assertTrue(loose.classify(residual={'sup': 1e-3})['steady'])

    def test_walls_remark(self):
        """Critical walls are mentioned in the remarks."""
        result = self.classifier.classify(residual={'sup': 0.0},
                                          moving_plane={'verdict': 'radial'},
                                          critical={'walls': 1, 'cells': 2})
        self.assertTrue(any('wall' in r for r in result['remarks']))


if __name__ == '__main__':
    unittest.main()
