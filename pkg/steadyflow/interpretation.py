"""
Classification of a full analysis run.

Combines the steadiness residual, the critical-set summary, the flux verdict
and the moving-plane verdict into the final label of the dichotomy: the
field is radial, or semilinear with a recovered F, or its level sets carry
branches that no single F can serve. Labels are only emitted when the
sub-report that certifies them passed.
"""

import logging
from typing import Any, Dict, List, Optional

from steadyflow.config import Tolerances

logger = logging.getLogger(__name__)


class AnalysisClassifier:
    """
    Rule-based final classification for ``analyze`` runs.

    Example Usage:
        >>> classifier = AnalysisClassifier()
        >>> result = classifier.classify(
        ...     residual={'sup': 3e-14},
        ...     flux={'verdict': 'single-valued', 'residual': 2e-8},
        ...     moving_plane={'verdict': 'radial'},
        ... )
        >>> result['classification']
        ['radial', 'semilinear']
    """

    LABELS = ("radial", "semilinear", "branch-discrepancy", "inconclusive")

    # Exit codes of the command-line contract
    EXIT_OK = 0
    EXIT_NON_STEADY = 2
    EXIT_INCONCLUSIVE = 3

    def __init__(self, tol: Optional[Tolerances] = None):
        self.tol = tol or Tolerances()

    def classify(
        self,
        residual: Dict[str, Any],
        flux: Optional[Dict[str, Any]] = None,
        moving_plane: Optional[Dict[str, Any]] = None,
        critical: Optional[Dict[str, Any]] = None,
    ) -> Dict[str, Any]:
        """
        Classify one run from the summaries of its sub-reports.

        Args:
            residual: Needs ``sup`` (steady residual, sup norm).
            flux: ``verdict`` ('single-valued' / 'branch-discrepancy'),
                ``residual`` (verified flux residual) and optionally
                ``affine`` and ``branches``. None when extraction was skipped.
            moving_plane: ``verdict`` ('radial' / 'axis-symmetric' /
                'asymmetric') and optionally ``center``. None when the
                domain has no bounded region.
            critical: Optional critical-set summary (``walls``, ``cells``).

        Returns:
            Dict with 'classification' (list of labels), 'steady',
            'remarks', 'summary' and 'exit_code'.
        """
        remarks: List[str] = []
        sup = float(residual.get("sup", float("inf")))
        steady = sup <= self.tol.steady_threshold
        labels: List[str] = []

        if not steady:
            remarks.append(f"Bracket residual {sup:.3e} exceeds {self.tol.steady_threshold:.1e}; "
                           "the field is not a steady solution")
            labels.append("branch-discrepancy")
            return self._result(labels, steady, remarks, self.EXIT_NON_STEADY, flux, moving_plane)

        if moving_plane is not None:
            verdict = moving_plane.get("verdict")
            if verdict == "radial":
                labels.append("radial")
                center = moving_plane.get("center")
                remarks.append(f"Every swept direction is a symmetry axis; center {center}")
            elif verdict == "axis-symmetric":
                remarks.append(f"Symmetric about {len(moving_plane.get('axes', []))} axes only")
            else:
                remarks.append("No symmetry axis found by the moving plane")

        if flux is not None:
            verdict = flux.get("verdict")
            flux_residual = flux.get("residual")
            if verdict == "single-valued":
                if flux_residual is not None and flux_residual <= self.tol.flux_residual_threshold:
                    labels.append("semilinear")
                    affine = flux.get("affine")
                    if affine:
                        remarks.append(f"F is affine: F(s) = {affine[0]:.6g} s + {affine[1]:.6g}")
                else:
                    remarks.append(f"Single-valued relation but residual {flux_residual} "
                                   f"above {self.tol.flux_residual_threshold:.1e}")
            elif verdict == "branch-discrepancy":
                labels.append("branch-discrepancy")
                branches = flux.get("branches") or []
                remarks.append(f"Level sets carry {max(len(branches), 2)} incompatible branches")

        if critical:
            walls = critical.get("walls", 0)
            if walls:
                remarks.append(f"{walls} even-degree wall(s) split the domain into "
                               f"{critical.get('cells', '?')} cells")

        if not labels:
            labels.append("inconclusive")
            code = self.EXIT_INCONCLUSIVE
        else:
            code = self.EXIT_OK
        return self._result(labels, steady, remarks, code, flux, moving_plane)

    def _result(self, labels, steady, remarks, code, flux, moving_plane) -> Dict[str, Any]:
        summary = self._generate_summary(labels, flux)
        logger.info("Classification: %s", summary)
        return {
            "classification": labels,
            "steady": steady,
            "remarks": remarks,
            "summary": summary,
            "exit_code": code,
        }

    def _generate_summary(self, labels: List[str], flux: Optional[Dict[str, Any]]) -> str:
        if labels == ["inconclusive"]:
            return "Inconclusive: no alternative could be certified"
        parts = []
        for label in labels:
            if label == "semilinear" and flux and flux.get("affine"):
                parts.append("semilinear (affine F)")
            else:
                parts.append(label)
        return " and ".join(parts)
