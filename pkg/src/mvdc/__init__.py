"""Multi-view depth completion toolkit.

Render partial point clouds into fixed-viewpoint depth maps, complete the
maps with a view-pooling conditional GAN, and fuse the completed views back
into a 3D point cloud.
"""

from .geometry import (
    Camera,
    CameraRig,
    DepthMap,
    NormalizationRecord,
    back_project,
    back_project_pixels,
    backproject_map,
    build_rig,
    denormalize_shape,
    normalize_shape,
    project,
    project_points,
    render,
    render_views,
)
from .fusion import FuseParams, VotedPoints, backproject_all, fuse, radius_outlier_removal, vote_filter
from .metrics import SpatialIndex, avg_l1, chamfer, nearest
from .dataset import PerturbParams, Sample, make_partial, make_sample, perturb_cloud

__version__ = "0.1.0"
