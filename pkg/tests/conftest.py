from __future__ import annotations

import pytest

from mimo.domain import CampaignRequest, MediaType, StylePrompt
from mimo.gateway import placeholder_png
from mimo.runstore import InMemoryImageStore


@pytest.fixture
def image_store():
    return InMemoryImageStore()


@pytest.fixture
def logo(image_store):
    return image_store.store_image(placeholder_png("logo"), MediaType.PNG)


@pytest.fixture
def campaign(logo):
    return CampaignRequest(
        prompt="summer sale",
        logo=logo,
        product="SolarKettle",
        style_pool_size=5,
        styles_to_run=3,
    )


@pytest.fixture
def style():
    return StylePrompt(
        0, "minimalist monochrome layout with soft daylight background and bold headline"
    )
