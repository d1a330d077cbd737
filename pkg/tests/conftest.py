import numpy as np
import pytest

from navp.frames import Frame, ScenePalette


@pytest.fixture
def palette4() -> ScenePalette:
    return ScenePalette(colors=((0, 0, 0), (255, 0, 0), (0, 255, 0), (0, 0, 255)))


def solid_frame(width: int, height: int, rgb=(255, 255, 255), frame_index: int = 0) -> Frame:
    pixels = np.full((height, width, 3), rgb, dtype=np.uint8)
    return Frame(width=width, height=height, pixels=pixels, frame_index=frame_index)


@pytest.fixture
def white_1x1() -> Frame:
    return solid_frame(1, 1)
