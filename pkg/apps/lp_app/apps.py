from django.apps import AppConfig


class LpAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.lp_app'
