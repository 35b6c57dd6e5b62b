"""Box-layout refinement for indoor scenes.

Given an RGB image and a coarse layout-contour probability map, infer the
best-fitting box layout: four boundary lines plus a vanishing point, with
occluded and undetected boundaries recovered, plus the evaluation metrics to
judge the result.
"""

from .coarse import (
    ContourMask, ProbabilityMap, SemanticHeatmap,
    argmax_labeling, argmax_surfaces, binarize_and_dilate, synthesize_coarse,
)
from .errors import (
    CoincidentPoints, DegenerateConfiguration, DimensionMismatch, EmptyDataset,
    EmptyMaskWarning, IdenticalLines, InsufficientSupport, InvalidTopology,
    LayoutError, NoSegments, NoValidHypothesis, ZeroContour,
)
from .geometry import (
    CEILING, CENTER, FLOOR, LEFT, RIGHT,
    ContourRaster, Corner, LayoutModel, Line, LineSegment, Point2,
    SurfaceLabeling, extract_corners, intersect_lines, layout_to_contour,
    layout_to_labeling, line_through,
)
from .hypothesis import HypothesisSet, enumerate_hypotheses, validate_hypothesis
from .inference import (
    CriticalLine, CriticalLineSet, assemble_critical_lines,
    extend_partial_floor_line, infer_wall_line_from_ceiling,
    recover_occluded_floor, regression_line_from_labeling,
)
from .metrics import ContourScore, EvalResult, contour_fscore, corner_error, pixel_error
from .pipeline import PipelineConfig, RefineResult, refine
from .ranking import ScoredLayout, score_layout, select_best
from .vanishing import (
    ClassifiedLines, VanishingTriple, detect_line_segments,
    estimate_vanishing_points, grid_search_candidates, select_critical_lines,
)

__version__ = "0.1.0"
