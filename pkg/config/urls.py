from django.urls import path
from apps.core.api import api


urlpatterns = [
    path("api/", api.urls),
]
